#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strank/corpus.hpp"

namespace strank {

// Deterministic synthetic benchmark for end-to-end checks. Every query gets
// its own document family with planted relevance signal:
//   - 2 grade-2 documents: three signal sentences spread early/mid/late,
//     each carrying most of the query's terms;
//   - 3 grade-1 documents: one mid-or-late sentence with two query terms;
//   - 3 judged negatives with three scattered one-term sentences (lexical
//     traps: their extracts cover more query terms than a weak positive's);
//   - 3 judged negatives with a single one-term sentence;
//   - 4 judged negatives of pure filler.
// Documents are 10-40 sentences, so late signal sits beyond a FirstP-128
// prefix.
struct SynthConfig {
  int num_queries = 60;
  std::uint64_t seed = 6121;
  double heldout_fraction = 0.2;
};

struct SynthDataset {
  std::vector<Document> corpus;
  std::vector<Query> queries;  // train ++ heldout
  std::vector<Query> train_queries;
  std::vector<Query> heldout_queries;
  QrelsTable qrels;
};

SynthDataset make_synth_dataset(const SynthConfig& cfg = {});

// Writes corpus.jsonl, queries.tsv, train_queries.tsv, heldout_queries.tsv,
// and qrels.txt under dir.
void write_synth_dataset(const SynthDataset& dataset, const std::string& dir);

}  // namespace strank
