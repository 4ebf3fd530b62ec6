#include "dcmcl/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dcmcl {

void ParallelCorpus::validate() const {
  if (src.size() != tgt.size()) throw std::invalid_argument("corpus: source and target counts differ");
  auto check = [this](const std::vector<Sentence>& side, const char* which) {
    for (std::size_t i = 0; i < side.size(); ++i) {
      if (side[i].empty()) throw std::invalid_argument(std::string("corpus: empty ") + which + " sentence " + std::to_string(i));
      for (int t : side[i]) {
        if (t < kFirstWord || t >= vocab_size) {
          throw std::invalid_argument(std::string("corpus: ") + which + " sentence " + std::to_string(i) +
                                      " has id " + std::to_string(t) + " outside the word range");
        }
      }
    }
  };
  check(src, "source");
  check(tgt, "target");
}

Sentence parse_sentence(const std::string& line, int vocab_size) {
  Sentence out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    int id = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw std::invalid_argument("bad token '" + tok + "'");
    if (id < kFirstWord || id >= vocab_size) throw std::invalid_argument("token " + tok + " outside the word range");
    out.push_back(id);
  }
  return out;
}

std::string format_sentence(std::span<const int> s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

std::vector<Sentence> read_sentences(const std::filesystem::path& path, int vocab_size) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<Sentence> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    try {
      out.push_back(parse_sentence(line, vocab_size));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_sentences(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : sentences) os << format_sentence(s) << '\n';
}

ParallelCorpus read_corpus(const std::filesystem::path& prefix, int vocab_size) {
  ParallelCorpus c;
  c.vocab_size = vocab_size;
  c.src = read_sentences(prefix.string() + ".src", vocab_size);
  c.tgt = read_sentences(prefix.string() + ".tgt", vocab_size);
  c.validate();
  return c;
}

void write_corpus(const std::filesystem::path& prefix, const ParallelCorpus& corpus) {
  write_sentences(prefix.string() + ".src", corpus.src);
  write_sentences(prefix.string() + ".tgt", corpus.tgt);
}

Task parse_task(const std::string& s) {
  if (s == "copy") return Task::copy;
  if (s == "reverse") return Task::reverse;
  if (s == "lexicon") return Task::lexicon;
  throw std::invalid_argument("unknown task '" + s + "' (expected copy|reverse|lexicon)");
}

const char* to_string(Task t) {
  switch (t) {
    case Task::copy: return "copy";
    case Task::reverse: return "reverse";
    case Task::lexicon: return "lexicon";
  }
  return "?";
}

std::vector<int> lexicon_table(int vocab_size, Rng& rng) {
  std::vector<int> table(static_cast<std::size_t>(vocab_size));
  std::iota(table.begin(), table.end(), 0);
  std::shuffle(table.begin() + kFirstWord, table.end(), rng.engine());
  return table;
}

Sentence lexicon_translate(std::span<const int> src, std::span<const int> table) {
  Sentence out;
  out.reserve(src.size());
  for (int t : src) {
    if (t < 0 || static_cast<std::size_t>(t) >= table.size()) throw std::out_of_range("lexicon: id outside table");
    out.push_back(table[static_cast<std::size_t>(t)]);
  }
  for (std::size_t i = 0; i + 1 < out.size(); i += 2) std::swap(out[i], out[i + 1]);
  return out;
}

ParallelCorpus gen_synthetic(Task task, int n_pairs, int vocab_size, int min_len, int max_len, int model_max_len,
                             Rng& rng) {
  if (vocab_size < 8) throw std::invalid_argument("gen_synthetic: vocab_size must be >= 8");
  if (n_pairs < 1) throw std::invalid_argument("gen_synthetic: n_pairs must be >= 1");
  if (min_len < 1 || min_len > max_len || max_len > model_max_len - 2) {
    throw std::invalid_argument("gen_synthetic: need 1 <= min_len <= max_len <= max_len_model - 2");
  }
  ParallelCorpus c;
  c.vocab_size = vocab_size;
  const std::vector<int> table = task == Task::lexicon ? lexicon_table(vocab_size, rng) : std::vector<int>{};
  for (int i = 0; i < n_pairs; ++i) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(min_len, max_len));
    Sentence s(len);
    for (int& t : s) t = static_cast<int>(rng.uniform_int(kFirstWord, vocab_size - 1));
    Sentence y;
    switch (task) {
      case Task::copy: y = s; break;
      case Task::reverse: y.assign(s.rbegin(), s.rend()); break;
      case Task::lexicon: y = lexicon_translate(s, table); break;
    }
    c.src.push_back(std::move(s));
    c.tgt.push_back(std::move(y));
  }
  return c;
}

std::vector<Batch> batch_by_tokens(const ParallelCorpus& corpus, int budget, Rng& rng, bool shuffle) {
  if (corpus.src.size() != corpus.tgt.size()) throw std::invalid_argument("batch_by_tokens: misaligned corpus");
  auto cost = [&corpus](std::size_t i) { return std::max(corpus.src[i].size(), corpus.tgt[i].size()); };
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i : order) {
    if (cost(i) > static_cast<std::size_t>(budget)) {
      throw std::invalid_argument("batch_by_tokens: sentence " + std::to_string(i) + " (" + std::to_string(cost(i)) +
                                  " tokens) exceeds the budget of " + std::to_string(budget));
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cost(a) < cost(b); });

  std::vector<Batch> batches;
  Batch cur;
  std::size_t used = 0;
  for (std::size_t i : order) {
    if (!cur.indices.empty() && used + cost(i) > static_cast<std::size_t>(budget)) {
      batches.push_back(std::move(cur));
      cur = Batch{};
      used = 0;
    }
    cur.indices.push_back(i);
    cur.src.push_back(corpus.src[i]);
    cur.tgt.push_back(corpus.tgt[i]);
    used += cost(i);
  }
  if (!cur.indices.empty()) batches.push_back(std::move(cur));
  if (shuffle) std::shuffle(batches.begin(), batches.end(), rng.engine());
  return batches;
}

template <typename S>
DistillReport distill(const Model<S>& teacher, const ParallelCorpus& corpus, const DecodeConfig& config) {
  DistillReport report;
  report.corpus.vocab_size = corpus.vocab_size;
  report.corpus.src = corpus.src;
  const auto keep = static_cast<std::size_t>(teacher.config().max_len - 1);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Hypothesis h = beam_search(teacher, corpus.src[i], config);
    if (h.tokens.empty()) {
      report.corpus.tgt.push_back(corpus.tgt[i]);
      ++report.empty_replaced;
      continue;
    }
    if (h.tokens.size() > keep) {
      h.tokens.resize(keep);
      ++report.truncated;
    }
    report.corpus.tgt.push_back(std::move(h.tokens));
  }
  return report;
}

template DistillReport distill(const Model<float>&, const ParallelCorpus&, const DecodeConfig&);
template DistillReport distill(const Model<double>&, const ParallelCorpus&, const DecodeConfig&);

}  // namespace dcmcl
