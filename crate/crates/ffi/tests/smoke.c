#include <math.h>
#include <stdio.h>
#include <string.h>

#include "oracle_rank.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,  \
              oracle_rank_last_error());                              \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(int argc, char **argv) {
  if (argc != 3) {
    fprintf(stderr, "usage: smoke RECORDS OUTCOMES\n");
    return 2;
  }

  double sim = 0.0;
  CHECK(oracle_rank_tfidf_cosine("getValue returns value", "returns the stored value", &sim) ==
        ORACLE_RANK_STATUS_OK);
  CHECK(fabs(sim - 0.4656462190988999) < 1e-12);

  double rows[6 * 2] = {0, 0, 0.1, 0.1, 0.2, 0, 0, 0.2, 0.1, 0, 9, 9};
  OracleRankForest *forest = NULL;
  CHECK(oracle_rank_forest_fit(rows, 6, 2, 100, 0, 7, &forest) == ORACLE_RANK_STATUS_OK);
  double inlier = 0.0, outlier = 0.0;
  CHECK(oracle_rank_forest_score(forest, &rows[0], 2, &inlier) == ORACLE_RANK_STATUS_OK);
  CHECK(oracle_rank_forest_score(forest, &rows[10], 2, &outlier) == ORACLE_RANK_STATUS_OK);
  CHECK(outlier > inlier);
  CHECK(oracle_rank_forest_score(forest, rows, 3, &inlier) == ORACLE_RANK_STATUS_INVALID_ARG);
  CHECK(strlen(oracle_rank_last_error()) > 0);
  oracle_rank_forest_free(forest);

  OracleRankCorpus *corpus = NULL;
  CHECK(oracle_rank_corpus_ingest(argv[1], argv[2], &corpus) == ORACLE_RANK_STATUS_OK);
  size_t ks[] = {1, 5};
  uint64_t seeds[] = {0, 1};
  char *json = NULL;
  CHECK(oracle_rank_evaluate(corpus, ks, 2, seeds, 2, ORACLE_RANK_RANKING_IFOREST, true, &json) ==
        ORACLE_RANK_STATUS_OK);
  CHECK(strstr(json, "\"no_exception\"") != NULL);
  printf("entries=%zu bugs=%zu json_bytes=%zu\n", oracle_rank_corpus_len(corpus),
         oracle_rank_corpus_bug_count(corpus), strlen(json));
  oracle_rank_string_free(json);
  oracle_rank_corpus_free(corpus);
  return 0;
}
