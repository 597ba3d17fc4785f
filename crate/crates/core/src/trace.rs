//! JVM stack traces and the lexical `catch` scan over test prefixes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable stack trace ({reason}): {text:?}")]
pub struct TraceError {
    pub reason: &'static str,
    pub text: String,
}

/// A failed test's stack trace, reduced to its outermost exception.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedTrace {
    pub test_qualified_name: String,
    pub exception_qualified_name: String,
    pub exception_simple_name: String,
    pub message: Option<String>,
    pub frames: Vec<String>,
}

fn simple_name(qualified: &str) -> &str {
    qualified.rsplit('.').next().unwrap_or(qualified)
}

/// Parses a trace laid out as: test name, exception line, then stack lines.
///
/// Only the outermost exception is kept; everything from the first
/// `Caused by:` line on is dropped. Non-frame lines of the outermost section
/// (such as `... 12 more`) are kept in `frames` as they appear.
pub fn parse_trace(raw: &str) -> Result<ParsedTrace, TraceError> {
    let err = |reason| TraceError {
        reason,
        text: raw.to_string(),
    };
    let mut lines = raw.lines();
    let test = lines.next().map(str::trim).unwrap_or_default();
    let exception_line = lines.next().ok_or_else(|| err("fewer than two lines"))?;
    let exception_line = exception_line.trim_start().trim_end_matches(['\r', '\n']);
    if exception_line.trim().is_empty() {
        return Err(err("empty exception line"));
    }
    // An empty message still leaves its delimiter behind, possibly without
    // the trailing space.
    let (qualified, message) = match exception_line.split_once(": ") {
        Some((q, m)) => (q.trim_end(), Some(m.trim_end().to_string())),
        None => match exception_line.trim_end().strip_suffix(':') {
            Some(q) => (q.trim_end(), Some(String::new())),
            None => (exception_line.trim_end(), None),
        },
    };
    let frames = lines
        .map(str::trim)
        .take_while(|l| !l.starts_with("Caused by:"))
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    Ok(ParsedTrace {
        test_qualified_name: test.to_string(),
        exception_qualified_name: qualified.to_string(),
        exception_simple_name: simple_name(qualified).to_string(),
        message,
        frames,
    })
}

/// Something odd the `catch` scanner ran into. Scanning always completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDiagnostic {
    UnterminatedString { offset: usize },
    UnterminatedChar { offset: usize },
    UnterminatedComment { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CatchScan {
    pub has_catch: bool,
    pub diagnostics: Vec<ScanDiagnostic>,
}

#[derive(Clone, Copy)]
enum State {
    Code,
    LineComment,
    BlockComment(usize),
    Str(usize),
    TextBlock(usize),
    Char(usize),
}

fn is_ident(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$' || c >= 0x80
}

/// Looks for a bare `catch` keyword outside literals and comments.
pub fn scan_catch(source: &str) -> CatchScan {
    let b = source.as_bytes();
    let mut scan = CatchScan::default();
    let mut state = State::Code;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match state {
            State::Code => {
                if c == b'/' && b.get(i + 1) == Some(&b'/') {
                    state = State::LineComment;
                    i += 2;
                } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
                    state = State::BlockComment(i);
                    i += 2;
                } else if b[i..].starts_with(b"\"\"\"") {
                    state = State::TextBlock(i);
                    i += 3;
                } else if c == b'"' {
                    state = State::Str(i);
                    i += 1;
                } else if c == b'\'' {
                    state = State::Char(i);
                    i += 1;
                } else if is_ident(c) {
                    let start = i;
                    while i < b.len() && is_ident(b[i]) {
                        i += 1;
                    }
                    if &b[start..i] == b"catch" {
                        scan.has_catch = true;
                    }
                } else {
                    i += 1;
                }
            }
            State::LineComment => {
                if c == b'\n' {
                    state = State::Code;
                }
                i += 1;
            }
            State::BlockComment(_) => {
                if c == b'*' && b.get(i + 1) == Some(&b'/') {
                    state = State::Code;
                    i += 2;
                } else {
                    i += 1;
                }
            }
            State::Str(_) | State::Char(_) => {
                let close = if matches!(state, State::Str(_)) { b'"' } else { b'\'' };
                if c == b'\\' {
                    i += 2;
                } else {
                    if c == close {
                        state = State::Code;
                    } else if c == b'\n' {
                        // Java literals cannot span lines; resync on the next one.
                        scan.diagnostics.push(match state {
                            State::Str(offset) => ScanDiagnostic::UnterminatedString { offset },
                            State::Char(offset) => ScanDiagnostic::UnterminatedChar { offset },
                            _ => unreachable!(),
                        });
                        state = State::Code;
                    }
                    i += 1;
                }
            }
            State::TextBlock(_) => {
                if c == b'\\' {
                    i += 2;
                } else if b[i..].starts_with(b"\"\"\"") {
                    state = State::Code;
                    i += 3;
                } else {
                    i += 1;
                }
            }
        }
    }
    match state {
        State::Code | State::LineComment => {}
        State::BlockComment(offset) => scan.diagnostics.push(ScanDiagnostic::UnterminatedComment { offset }),
        State::Str(offset) | State::TextBlock(offset) => {
            scan.diagnostics.push(ScanDiagnostic::UnterminatedString { offset })
        }
        State::Char(offset) => scan.diagnostics.push(ScanDiagnostic::UnterminatedChar { offset }),
    }
    scan
}

pub fn prefix_has_catch(prefix_source: &str) -> bool {
    scan_catch(prefix_source).has_catch
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIGURE_TRACE: &str = "org.apache.commons.math.FooTest::test07\n\
junit.framework.AssertionFailedError: expected:<1> but was:<2>\n\
\tat junit.framework.Assert.fail(Assert.java:57)\n\
\tat junit.framework.Assert.failNotEquals(Assert.java:329)\n\
\tat org.apache.commons.math.FooTest.test07(FooTest.java:92)";

    #[test]
    fn assertion_trace() {
        let t = parse_trace(FIGURE_TRACE).unwrap();
        assert_eq!(t.test_qualified_name, "org.apache.commons.math.FooTest::test07");
        assert_eq!(t.exception_qualified_name, "junit.framework.AssertionFailedError");
        assert_eq!(t.exception_simple_name, "AssertionFailedError");
        assert_eq!(t.message.as_deref(), Some("expected:<1> but was:<2>"));
        assert_eq!(t.frames.len(), 3);
        assert_eq!(t.frames[0], "at junit.framework.Assert.fail(Assert.java:57)");
    }

    #[test]
    fn no_message() {
        let t = parse_trace("T::t\njava.lang.NullPointerException\n\tat A.b(A.java:3)").unwrap();
        assert_eq!(t.exception_simple_name, "NullPointerException");
        assert_eq!(t.message, None);
    }

    #[test]
    fn message_splits_on_first_delimiter_only() {
        let t = parse_trace("T::t\njava.lang.RuntimeException: outer: inner").unwrap();
        assert_eq!(t.message.as_deref(), Some("outer: inner"));
        assert!(t.frames.is_empty());
    }

    #[test]
    fn one_line_is_an_error() {
        let e = parse_trace("T::t").unwrap_err();
        assert_eq!(e.text, "T::t");
        assert!(parse_trace("T::t\n   \n\tat x").is_err());
        assert!(parse_trace("").is_err());
    }

    #[test]
    fn nested_cause_is_dropped() {
        let raw = "T::t\n\
java.lang.RuntimeException: wrapper\n\
\tat A.a(A.java:1)\n\
\tat A.b(A.java:2)\n\
Caused by: java.lang.IllegalArgumentException: root\n\
\tat C.c(C.java:9)\n\
\t... 2 more";
        let t = parse_trace(raw).unwrap();
        assert_eq!(t.exception_simple_name, "RuntimeException");
        assert_eq!(t.frames, ["at A.a(A.java:1)", "at A.b(A.java:2)"]);
    }

    #[test]
    fn elision_lines_are_retained() {
        let t = parse_trace("T::t\nx.Y\n\tat A.a(A.java:1)\n\t... 12 more").unwrap();
        assert_eq!(t.frames, ["at A.a(A.java:1)", "... 12 more"]);
    }

    #[test]
    fn unqualified_exception() {
        let t = parse_trace("T::t\nAssertionError").unwrap();
        assert_eq!(t.exception_simple_name, "AssertionError");
    }

    #[test]
    fn catch_clause_detected() {
        assert!(prefix_has_catch("try { f(); } catch (Exception e) { fail(); }"));
        assert!(prefix_has_catch("try{f();}catch(Exception e){}"));
    }

    #[test]
    fn catch_in_literals_and_comments_ignored() {
        assert!(!prefix_has_catch(r#"String s = "catch me";"#));
        assert!(!prefix_has_catch("// catch\nint x = 0;"));
        assert!(!prefix_has_catch("/* try { } catch (E e) { } */ int y;"));
        assert!(!prefix_has_catch(r#"String s = "a \" catch";"#));
        assert!(!prefix_has_catch("String t = \"\"\"\n catch \n\"\"\";"));
        assert!(!prefix_has_catch("char c = '\"'; String s = \"catch\";"));
    }

    #[test]
    fn catch_must_be_whole_word() {
        assert!(!prefix_has_catch("int catcher = 0; catch_all(); recatch();"));
    }

    #[test]
    fn unterminated_literal_reported() {
        let s = scan_catch("String s = \"open\nint x; catch (E e) {}");
        assert!(s.has_catch);
        assert_eq!(s.diagnostics, [ScanDiagnostic::UnterminatedString { offset: 11 }]);
        let s = scan_catch("/* never closed catch");
        assert!(!s.has_catch);
        assert_eq!(s.diagnostics, [ScanDiagnostic::UnterminatedComment { offset: 0 }]);
    }

    proptest! {
        #[test]
        fn frame_count_matches_at_lines(
            pkg in "[a-z]{1,6}(\\.[a-z]{1,6}){0,3}",
            name in "[A-Z][a-zA-Z]{0,12}",
            msg in proptest::option::of("[ -~]{0,30}"),
            frames in proptest::collection::vec("[a-zA-Z.]{1,20}\\([A-Za-z]{1,8}\\.java:[0-9]{1,4}\\)", 0..20),
        ) {
            let qualified = format!("{pkg}.{name}");
            let mut raw = format!("a.BTest::test1\n{qualified}");
            if let Some(m) = &msg {
                raw.push_str(": ");
                raw.push_str(m);
            }
            for f in &frames {
                raw.push_str("\n\tat ");
                raw.push_str(f);
            }
            let t = parse_trace(&raw).unwrap();
            prop_assert_eq!(t.frames.len(), frames.len());
            prop_assert!(!t.exception_simple_name.contains('.'));
            prop_assert_eq!(&t.exception_simple_name, &name);
        }

        #[test]
        fn catch_invariant_under_trailing_noise(
            body in "[a-z(){}; ]{0,40}",
            ws in "[ \t\n]{0,5}",
            comment in "[a-bd-z ]{0,20}",
        ) {
            let base = prefix_has_catch(&body);
            let with_ws = format!("{body}{ws}");
            prop_assert_eq!(prefix_has_catch(&with_ws), base);
            let with_comment = format!("{body}\n// {comment}");
            prop_assert_eq!(prefix_has_catch(&with_comment), base);
            let with_block = format!("{body} /* {comment} catch */");
            prop_assert_eq!(prefix_has_catch(&with_block), base);
        }
    }
}
