#include "strank/rerank.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <numeric>
#include <set>
#include <mutex>
#include <thread>

#include "strank/errors.hpp"

namespace strank {

void WindowPlan::validate() const {
  if (step < 1 || step > window)
    throw ConfigError("window plan requires 1 <= step <= window, got step=" +
                      std::to_string(step) + " window=" + std::to_string(window));
}

ParsedPermutation repair_ordering(const std::vector<int>& candidate, int window_len) {
  ParsedPermutation result;
  result.order.reserve(static_cast<std::size_t>(window_len));
  std::vector<char> seen(static_cast<std::size_t>(window_len) + 1, 0);
  for (int id : candidate) {
    if (id < 1 || id > window_len) {
      ++result.repair_count;  // out of range
      continue;
    }
    if (seen[static_cast<std::size_t>(id)]) {
      ++result.repair_count;  // repeat, first occurrence wins
      continue;
    }
    seen[static_cast<std::size_t>(id)] = 1;
    result.order.push_back(id);
  }
  for (int id = 1; id <= window_len; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      result.order.push_back(id);
      ++result.repair_count;  // missing, appended in window order
    }
  }
  return result;
}

ParsedPermutation parse_permutation(std::string_view raw, int window_len) {
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
    if (j > i + 1 && j < raw.size() && raw[j] == ']') {
      long value = 0;
      bool overflow = j - i - 1 > 9;  // longer than any sane window id
      if (!overflow) value = std::stol(std::string(raw.substr(i + 1, j - i - 1)));
      ids.push_back(overflow ? 0 : static_cast<int>(value));  // 0 repairs as out-of-range
      i = j + 1;
    } else {
      ++i;
    }
  }
  return repair_ordering(ids, window_len);
}

std::string render_permutation(const std::vector<int>& order) {
  std::string out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0) out += " > ";
    out += "[" + std::to_string(order[i]) + "]";
  }
  return out;
}

std::vector<int> OracleQrelsBackend::order_window(const Query& query,
                                                  const std::vector<WindowItem>& items) {
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return qrels_->grade(query.query_id, items[static_cast<std::size_t>(a - 1)].doc_id) >
           qrels_->grade(query.query_id, items[static_cast<std::size_t>(b - 1)].doc_id);
  });
  return order;
}

std::vector<int> LexicalOverlapBackend::order_window(const Query& query,
                                                     const std::vector<WindowItem>& items) {
  std::vector<std::string> query_tokens = tokenize(query.text);
  std::set<std::string> query_terms(query_tokens.begin(), query_tokens.end());
  std::vector<double> scores(items.size(), 0.0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    std::vector<std::string> tokens = tokenize(items[i].text);
    std::set<std::string> terms(tokens.begin(), tokens.end());
    for (const std::string& t : query_terms)
      if (terms.count(t) > 0) scores[i] += idf_.get(t);
  }
  std::vector<int> order(items.size());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const WindowItem& ia = items[static_cast<std::size_t>(a - 1)];
    const WindowItem& ib = items[static_cast<std::size_t>(b - 1)];
    if (ia.is_safeguard != ib.is_safeguard) return !ia.is_safeguard;  // safeguard last
    return scores[static_cast<std::size_t>(a - 1)] > scores[static_cast<std::size_t>(b - 1)];
  });
  return order;
}

RemoteRerankBackend::RemoteRerankBackend(RemoteConfig cfg, PromptTemplate tpl)
    : client_(std::move(cfg)), tpl_(std::move(tpl)) {}

std::vector<int> RemoteRerankBackend::order_window(const Query& query,
                                                   const std::vector<WindowItem>& items) {
  std::string numbered;
  for (std::size_t i = 0; i < items.size(); ++i) {
    numbered += "[" + std::to_string(i + 1) + "] " + items[i].text;
    numbered.push_back('\n');
  }
  std::string reply =
      client_.complete(rerank_system_line(), render_prompt(tpl_, query, numbered));
  ParsedPermutation parsed = parse_permutation(reply, static_cast<int>(items.size()));
  repairs_.fetch_add(static_cast<std::uint64_t>(parsed.repair_count));
  return parsed.order;
}

std::vector<int> rerank_window(RerankerBackend& backend, const Query& query,
                               const std::vector<WindowItem>& items) {
  std::vector<int> proposed = backend.order_window(query, items);
  return repair_ordering(proposed, static_cast<int>(items.size())).order;
}

RankedList sliding_window_rerank(RerankerBackend& backend, const Query& query,
                                 std::vector<WindowItem> items, const WindowPlan& plan) {
  plan.validate();
  const std::size_t n = items.size();
  const std::size_t w = static_cast<std::size_t>(plan.window);
  std::vector<std::size_t> starts;
  if (n <= w) {
    starts.push_back(0);
  } else {
    std::size_t s = n - w;
    starts.push_back(s);
    while (s > 0) {
      s = s > static_cast<std::size_t>(plan.step) ? s - static_cast<std::size_t>(plan.step)
                                                  : 0;
      starts.push_back(s);
    }
  }
  for (std::size_t start : starts) {
    const std::size_t len = std::min(w, n - start);
    std::vector<WindowItem> window(items.begin() + static_cast<std::ptrdiff_t>(start),
                                   items.begin() + static_cast<std::ptrdiff_t>(start + len));
    std::vector<int> order = rerank_window(backend, query, window);
    for (std::size_t i = 0; i < len; ++i)
      items[start + i] = window[static_cast<std::size_t>(order[i] - 1)];
  }
  RankedList out{query.query_id, {}, backend.name()};
  out.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.entries.push_back(RunEntry{items[i].doc_id, static_cast<double>(n - i),
                                   static_cast<int>(i) + 1});
  return out;
}

std::vector<WindowItem> window_items_for_query(
    const RankedList& list, const SummaryStore& summaries,
    const std::vector<Document>& corpus,
    const std::unordered_map<std::string, std::size_t>& by_id) {
  std::vector<WindowItem> items;
  items.reserve(list.entries.size());
  for (const RunEntry& e : list.entries) {
    WindowItem item;
    item.doc_id = e.doc_id;
    if (const Summary* s = summaries.find(list.query_id, e.doc_id); s != nullptr) {
      item.text = s->text;
      item.is_safeguard = s->is_safeguard;
    } else {
      auto doc = by_id.find(e.doc_id);
      if (doc == by_id.end())
        throw InvariantViolation("run references unknown doc id " + e.doc_id);
      item.text = first_p(corpus[doc->second], 128);
      item.is_safeguard = detect_safeguard(item.text);
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<RankedList> rerank_run(RerankerBackend& backend,
                                   const std::vector<Query>& queries,
                                   const std::vector<RankedList>& run,
                                   const std::vector<std::vector<WindowItem>>& items,
                                   const WindowPlan& plan, int parallelism) {
  if (run.size() != items.size() || run.size() != queries.size())
    throw InvariantViolation("rerank_run requires aligned queries, run, and items");
  std::vector<RankedList> out(run.size());
  const std::size_t workers =
      std::min<std::size_t>(std::max(parallelism, 1), run.empty() ? 1 : run.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < run.size(); ++i)
      out[i] = sliding_window_rerank(backend, queries[i], items[i], plan);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= run.size()) return;
        try {
          out[i] = sliding_window_rerank(backend, queries[i], items[i], plan);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace strank
