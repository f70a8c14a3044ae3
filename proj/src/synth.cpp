#include "strank/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "strank/errors.hpp"
#include "strank/rng.hpp"

namespace strank {

namespace {

const char* const kSyllables[] = {"ba", "ce", "di", "fo", "gu", "ha", "ke", "li",
                                  "mo", "nu", "pa", "re", "si", "to", "vu", "wa",
                                  "xe", "yi", "zo", "qua"};
constexpr std::size_t kSyllableCount = sizeof(kSyllables) / sizeof(kSyllables[0]);

std::string make_word(std::mt19937_64& rng, std::size_t syllables) {
  std::string word;
  for (std::size_t i = 0; i < syllables; ++i)
    word += kSyllables[uniform_below(rng, kSyllableCount)];
  return word;
}

std::string fresh_word(std::mt19937_64& rng, std::set<std::string>& used,
                       std::size_t syllables) {
  for (;;) {
    std::string word = make_word(rng, syllables);
    if (used.insert(word).second) return word;
  }
}

// A filler sentence of 6-11 vocabulary words, terminated with a period.
std::string filler_sentence(std::mt19937_64& rng, const std::vector<std::string>& vocab) {
  std::size_t words = 6 + uniform_below(rng, 6);
  std::string sentence;
  for (std::size_t i = 0; i < words; ++i) {
    if (i > 0) sentence.push_back(' ');
    sentence += vocab[uniform_below(rng, vocab.size())];
  }
  sentence.push_back('.');
  return sentence;
}

// Filler sentence with the given terms planted at interior positions.
std::string signal_sentence(std::mt19937_64& rng, const std::vector<std::string>& vocab,
                            const std::vector<std::string>& terms) {
  std::vector<std::string> words;
  std::size_t filler = 5 + uniform_below(rng, 4);
  for (std::size_t i = 0; i < filler; ++i)
    words.push_back(vocab[uniform_below(rng, vocab.size())]);
  for (const std::string& term : terms) {
    std::size_t at = 1 + uniform_below(rng, words.size() - 1);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), term);
  }
  std::string sentence;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) sentence.push_back(' ');
    sentence += words[i];
  }
  sentence.push_back('.');
  return sentence;
}

struct Placement {
  std::size_t sentence_count;
  std::vector<std::size_t> slots;  // where signal sentences go
};

// Signal positions rotate through early/mid/late so relevance is planted
// beyond the document lead as well.
Placement make_placement(std::mt19937_64& rng, std::size_t signals, int rotation) {
  Placement p;
  p.sentence_count = 10 + uniform_below(rng, 31);  // 10..40
  std::vector<std::size_t> anchors = {
      1 + uniform_below(rng, 3),                                    // early
      p.sentence_count / 2 + uniform_below(rng, 3),                 // mid
      p.sentence_count - 3 + uniform_below(rng, 3),                 // late
  };
  for (std::size_t i = 0; i < signals; ++i)
    p.slots.push_back(anchors[(static_cast<std::size_t>(rotation) + i) % anchors.size()]);
  std::sort(p.slots.begin(), p.slots.end());
  p.slots.erase(std::unique(p.slots.begin(), p.slots.end()), p.slots.end());
  while (p.slots.size() < signals) {  // collisions: shift a copy forward
    std::size_t extra = (p.slots.back() + 2) % p.sentence_count;
    if (extra == 0) extra = 1;
    if (std::find(p.slots.begin(), p.slots.end(), extra) == p.slots.end())
      p.slots.push_back(extra);
    else
      p.slots.push_back(p.slots.back() + 1);
    std::sort(p.slots.begin(), p.slots.end());
  }
  for (std::size_t& s : p.slots) s = std::min(s, p.sentence_count - 1);
  return p;
}

Document make_doc(std::mt19937_64& rng, const std::vector<std::string>& vocab,
                  const std::string& doc_id,
                  const std::vector<std::vector<std::string>>& signal_terms,
                  int rotation) {
  Placement placement = make_placement(rng, signal_terms.size(), rotation);
  std::vector<std::string> sentences;
  sentences.reserve(placement.sentence_count);
  for (std::size_t i = 0; i < placement.sentence_count; ++i)
    sentences.push_back(filler_sentence(rng, vocab));
  for (std::size_t i = 0; i < signal_terms.size(); ++i)
    sentences[placement.slots[i]] = signal_sentence(rng, vocab, signal_terms[i]);
  Document doc;
  doc.doc_id = doc_id;
  if (uniform_below(rng, 2) == 0) {
    doc.title = vocab[uniform_below(rng, vocab.size())] + " " +
                vocab[uniform_below(rng, vocab.size())];
  }
  std::string body;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i > 0) body.push_back(' ');
    body += sentences[i];
  }
  doc.body = std::move(body);
  return doc;
}

}  // namespace

SynthDataset make_synth_dataset(const SynthConfig& cfg) {
  if (cfg.num_queries < 1) throw ConfigError("synth dataset needs at least one query");
  SynthDataset data;
  std::mt19937_64 vocab_rng = derived_rng(cfg.seed, "vocab");
  std::set<std::string> used;
  std::vector<std::string> vocab;
  vocab.reserve(300);
  for (int i = 0; i < 300; ++i) vocab.push_back(fresh_word(vocab_rng, used, 2));

  for (int q = 0; q < cfg.num_queries; ++q) {
    const std::string qid = std::to_string(1000 + q);
    std::mt19937_64 rng = derived_rng(cfg.seed, "query:" + qid);
    std::vector<std::string> terms;  // 4 topic terms unique to this query
    for (int t = 0; t < 4; ++t) terms.push_back(fresh_word(rng, used, 3));
    Query query{qid, terms[0] + " " + terms[1] + " " + terms[2] + " " + terms[3]};
    data.queries.push_back(query);

    int doc_no = 0;
    auto next_id = [&]() { return "D" + qid + "-" + std::to_string(doc_no++); };

    // Grade-2 documents: three sentences with three query terms each,
    // covering all four terms overall.
    for (int i = 0; i < 2; ++i) {
      std::vector<std::vector<std::string>> signals = {
          {terms[0], terms[1], terms[2]},
          {terms[1], terms[2], terms[3]},
          {terms[0], terms[2], terms[3]}};
      Document doc = make_doc(rng, vocab, next_id(), signals, i);
      data.qrels.set(qid, doc.doc_id, 2);
      data.corpus.push_back(std::move(doc));
    }
    // Grade-1 documents: one mid-or-late sentence carrying three terms.
    for (int i = 0; i < 3; ++i) {
      std::size_t skip = uniform_below(rng, 4);
      std::vector<std::string> triple;
      for (std::size_t t = 0; t < 4; ++t)
        if (t != skip) triple.push_back(terms[t]);
      std::vector<std::vector<std::string>> signals = {triple};
      Document doc = make_doc(rng, vocab, next_id(), signals, 1 + static_cast<int>(i % 2));
      data.qrels.set(qid, doc.doc_id, 1);
      data.corpus.push_back(std::move(doc));
    }
    // Trap negatives: two sentences with two terms each. Their extracts
    // cover all four query terms, so they tie or beat the positives under a
    // coverage reranker, yet per-sentence overlap stays at 0.5.
    for (int i = 0; i < 3; ++i) {
      std::size_t a = uniform_below(rng, 4);
      std::size_t b = (a + 1 + uniform_below(rng, 3)) % 4;
      std::vector<std::string> first = {terms[a], terms[b]}, second;
      for (std::size_t t = 0; t < 4; ++t)
        if (t != a && t != b) second.push_back(terms[t]);
      std::vector<std::vector<std::string>> signals = {first, second};
      Document doc = make_doc(rng, vocab, next_id(), signals, i);
      data.qrels.set(qid, doc.doc_id, 0);
      data.corpus.push_back(std::move(doc));
    }
    // Single-mention negatives.
    for (int i = 0; i < 3; ++i) {
      std::vector<std::vector<std::string>> signals = {{terms[uniform_below(rng, 4)]}};
      Document doc = make_doc(rng, vocab, next_id(), signals, 2 - (i % 3));
      data.qrels.set(qid, doc.doc_id, 0);
      data.corpus.push_back(std::move(doc));
    }
    // Clean negatives: judged, no query terms at all.
    for (int i = 0; i < 4; ++i) {
      Document doc = make_doc(rng, vocab, next_id(), {}, 0);
      data.qrels.set(qid, doc.doc_id, 0);
      data.corpus.push_back(std::move(doc));
    }
  }

  const int heldout =
      std::max(1, static_cast<int>(cfg.num_queries * cfg.heldout_fraction + 0.5));
  const int train = cfg.num_queries - heldout;
  for (int q = 0; q < cfg.num_queries; ++q)
    (q < train ? data.train_queries : data.heldout_queries).push_back(data.queries[q]);
  return data;
}

void write_synth_dataset(const SynthDataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/corpus.jsonl", std::ios::trunc);
    if (!out) throw IoFailure("cannot write corpus under " + dir);
    for (const Document& d : dataset.corpus) {
      // Vocabulary words never need JSON escaping.
      out << "{\"docid\":\"" << d.doc_id << "\",\"title\":\"" << d.title
          << "\",\"body\":\"" << d.body << "\"}\n";
    }
  }
  auto write_queries = [&](const std::vector<Query>& queries, const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + name + " under " + dir);
    for (const Query& q : queries) out << q.query_id << '\t' << q.text << '\n';
  };
  write_queries(dataset.queries, "queries.tsv");
  write_queries(dataset.train_queries, "train_queries.tsv");
  write_queries(dataset.heldout_queries, "heldout_queries.tsv");
  {
    std::ofstream out(dir + "/qrels.txt", std::ios::trunc);
    if (!out) throw IoFailure("cannot write qrels under " + dir);
    for (const Query& q : dataset.queries) {
      const auto* judged = dataset.qrels.judged(q.query_id);
      if (judged == nullptr) continue;
      std::vector<std::pair<std::string, int>> rows(judged->begin(), judged->end());
      std::sort(rows.begin(), rows.end());
      for (const auto& [doc, grade] : rows)
        out << q.query_id << " 0 " << doc << ' ' << grade << '\n';
    }
  }
}

}  // namespace strank
