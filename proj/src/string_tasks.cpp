// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/string_tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "rewritelab/errors.hpp"

namespace rewritelab::strings {

namespace {

// Stream tags for derive_seed so that every generator stage draws from an
// independent, individually replayable stream.
enum Stream : std::uint64_t {
  kRulesStream = 1,
  kTrainStream = 2,
  kTestStream = 3,
  kPowerLawStream = 4,
  kNoOpStream = 5,
};

Rng stream_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Rng{derive_seed(derive_seed(seed, stream), index)};
}

/// min(base^exp, cap) without overflow.
std::size_t saturating_pow(std::size_t base, std::size_t exp, std::size_t cap) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (base != 0 && out > cap / base) return cap;
    out *= base;
  }
  return std::min(out, cap);
}

LengthRange effective_dst_range(const BasicTaskConfig& cfg) {
  if (cfg.dst_len_range.max == 0) return {cfg.pattern_len, cfg.pattern_len};
  return cfg.dst_len_range;
}

Example make_example(TaskKind kind, const ReplaceRule& rule, std::string input, std::int64_t rule_id, Split split) {
  Example ex;
  ex.task_kind = kind;
  ex.instruction = render_rule(rule);
  auto outcome = apply_replace(input, rule);
  ex.input = std::move(input);
  ex.target = std::move(outcome.output);
  ex.meta.rule_id = rule_id;
  ex.meta.is_noop = !outcome.applied;
  ex.meta.split = split;
  return ex;
}

}  // namespace

RewriteOutcome apply_replace(std::string_view input, const ReplaceRule& rule) {
  if (rule.src.empty()) throw ValidationError("replace rule src must be non-empty");
  const auto pos = input.find(rule.src);
  if (pos == std::string_view::npos) return {std::string(input), false};
  std::string out;
  out.reserve(input.size() - rule.src.size() + rule.dst.size());
  out.append(input.substr(0, pos));
  out.append(rule.dst);
  out.append(input.substr(pos + rule.src.size()));
  return {std::move(out), true};
}

std::string render_rule(const ReplaceRule& rule) { return rule.src + std::string(kArrow) + rule.dst; }

ReplaceRule parse_rule(std::string_view text) {
  const auto arrow = text.find(kArrow);
  if (arrow == std::string_view::npos || text.find(kArrow, arrow + 1) != std::string_view::npos) {
    throw ParseError("expected exactly one '->' in rule", arrow == std::string_view::npos ? 0 : arrow);
  }
  ReplaceRule rule{std::string(text.substr(0, arrow)), std::string(text.substr(arrow + kArrow.size()))};
  if (rule.src.empty()) throw ParseError("rule src is empty", 0);
  return rule;
}

void validate_alphabet(std::string_view alphabet) {
  if (alphabet.empty()) throw ValidationError("alphabet must be non-empty");
  std::unordered_set<char> seen;
  for (char c : alphabet) {
    if (!seen.insert(c).second) throw ValidationError(std::string("duplicate letter in alphabet: ") + c);
    if (c == '-' || c == '>' || c == '\n' || c == ':' || static_cast<unsigned char>(c) < 0x21 ||
        static_cast<unsigned char>(c) > 0x7E) {
      throw ValidationError(std::string("letter not allowed in a task alphabet: '") + c + "'");
    }
  }
}

std::string random_string(std::size_t len, std::string_view alphabet, Rng& rng) {
  std::string out(len, '\0');
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  for (auto& c : out) c = alphabet[pick(rng)];
  return out;
}

std::string gen_input_with_pattern(std::string_view pattern, std::size_t input_len, std::string_view alphabet,
                                   Rng& rng) {
  if (input_len < pattern.size()) throw ValidationError("input_len is shorter than the pattern");
  if (alphabet.empty()) throw ValidationError("alphabet must be non-empty");
  std::string out = random_string(input_len, alphabet, rng);
  const auto window = std::uniform_int_distribution<std::size_t>(0, input_len - pattern.size())(rng);
  std::copy(pattern.begin(), pattern.end(), out.begin() + static_cast<std::ptrdiff_t>(window));
  return out;
}

namespace {

/// KMP automaton over `alphabet`; state == pattern.size() means "matched".
std::vector<std::vector<std::size_t>> kmp_automaton(std::string_view pattern, std::string_view alphabet) {
  const std::size_t m = pattern.size();
  std::vector<std::size_t> fail(m + 1, 0);
  for (std::size_t i = 1, k = 0; i < m; ++i) {
    while (k > 0 && pattern[i] != pattern[k]) k = fail[k];
    if (pattern[i] == pattern[k]) ++k;
    fail[i + 1] = k;
  }
  std::vector<std::vector<std::size_t>> next(m, std::vector<std::size_t>(alphabet.size(), 0));
  for (std::size_t state = 0; state < m; ++state) {
    for (std::size_t a = 0; a < alphabet.size(); ++a) {
      const char c = alphabet[a];
      std::size_t k = state;
      while (k > 0 && pattern[k] != c) k = fail[k];
      next[state][a] = pattern[k] == c ? k + 1 : 0;
    }
  }
  return next;
}

}  // namespace

std::string gen_input_without_pattern(std::string_view pattern, std::size_t input_len, std::string_view alphabet,
                                      Rng& rng, std::size_t max_tries) {
  if (alphabet.empty()) throw ValidationError("alphabet must be non-empty");
  if (pattern.empty()) throw UnsatisfiableError("every string contains the empty pattern");
  for (std::size_t t = 0; t < max_tries; ++t) {
    std::string s = random_string(input_len, alphabet, rng);
    if (s.find(pattern) == std::string::npos) return s;
  }
  // alive[r][state]: r more letters can be appended from `state` without
  // completing the pattern.
  const auto next = kmp_automaton(pattern, alphabet);
  const std::size_t m = pattern.size();
  std::vector<std::vector<char>> alive(input_len + 1, std::vector<char>(m, 0));
  std::fill(alive[0].begin(), alive[0].end(), 1);
  for (std::size_t r = 1; r <= input_len; ++r) {
    for (std::size_t state = 0; state < m; ++state) {
      for (std::size_t a = 0; a < alphabet.size(); ++a) {
        const auto to = next[state][a];
        if (to < m && alive[r - 1][to]) {
          alive[r][state] = 1;
          break;
        }
      }
    }
  }
  if (!alive[input_len][0]) {
    throw UnsatisfiableError("no string of length " + std::to_string(input_len) + " over the alphabet avoids '" +
                             std::string(pattern) + "'");
  }
  std::string out;
  out.reserve(input_len);
  std::size_t state = 0;
  std::vector<std::size_t> options;
  for (std::size_t r = input_len; r > 0; --r) {
    options.clear();
    for (std::size_t a = 0; a < alphabet.size(); ++a) {
      const auto to = next[state][a];
      if (to < m && alive[r - 1][to]) options.push_back(a);
    }
    const auto a = options[uniform_index(rng, options.size())];
    out.push_back(alphabet[a]);
    state = next[state][a];
  }
  return out;
}

void validate(const BasicTaskConfig& cfg) {
  validate_alphabet(cfg.alphabet);
  if (cfg.num_instructions == 0) throw ValidationError("num_instructions must be positive");
  if (cfg.examples_per_instruction == 0) throw ValidationError("examples_per_instruction must be positive");
  if (cfg.pattern_len == 0) throw ValidationError("pattern_len must be positive");
  if (cfg.pattern_len >= cfg.input_len) throw ValidationError("pattern_len must be smaller than input_len");
  if (cfg.dst_len_range.max != 0 && cfg.dst_len_range.min > cfg.dst_len_range.max) {
    throw ValidationError("dst_len_range min exceeds max");
  }
}

nlohmann::json to_json(const BasicTaskConfig& cfg) {
  const auto dst = effective_dst_range(cfg);
  return {{"num_instructions", cfg.num_instructions},
          {"examples_per_instruction", cfg.examples_per_instruction},
          {"input_len", cfg.input_len},
          {"pattern_len", cfg.pattern_len},
          {"dst_len_min", dst.min},
          {"dst_len_max", dst.max},
          {"alphabet", cfg.alphabet},
          {"test_instructions", cfg.test_instructions},
          {"test_examples_per_instruction", cfg.test_examples_per_instruction},
          {"seed", cfg.seed}};
}

std::vector<ReplaceRule> gen_rules(std::size_t count, const BasicTaskConfig& cfg, Rng& rng,
                                   const std::vector<ReplaceRule>& exclude) {
  const std::size_t needed = count + exclude.size();
  if (saturating_pow(cfg.alphabet.size(), cfg.pattern_len, needed) < needed) {
    throw CapacityError("alphabet of " + std::to_string(cfg.alphabet.size()) + " letters cannot form " +
                        std::to_string(needed) + " distinct patterns of length " + std::to_string(cfg.pattern_len));
  }
  std::unordered_set<std::string> used;
  for (const auto& r : exclude) used.insert(r.src);
  const auto dst_range = effective_dst_range(cfg);
  std::uniform_int_distribution<std::size_t> dst_len(dst_range.min, dst_range.max);
  std::vector<ReplaceRule> rules;
  rules.reserve(count);
  const std::size_t max_attempts = 64 * count + 1024;
  for (std::size_t attempt = 0; rules.size() < count; ++attempt) {
    if (attempt >= max_attempts) throw CapacityError("could not draw enough distinct rule patterns");
    std::string src = random_string(cfg.pattern_len, cfg.alphabet, rng);
    if (!used.insert(src).second) continue;
    std::string dst = random_string(dst_len(rng), cfg.alphabet, rng);
    rules.push_back({std::move(src), std::move(dst)});
  }
  return rules;
}

namespace {

void append_examples(std::vector<Example>& out, TaskKind kind, const ReplaceRule& rule, std::int64_t rule_id,
                     Split split, std::size_t count, std::size_t noops, const BasicTaskConfig& cfg, Rng& rng) {
  // Which of the `count` slots are No-Ops: the first `noops` entries of a
  // random permutation.
  std::vector<char> is_noop(count, 0);
  if (noops > 0) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < noops; ++i) is_noop[order[i]] = 1;
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::string input = is_noop[i] ? gen_input_without_pattern(rule.src, cfg.input_len, cfg.alphabet, rng)
                                   : gen_input_with_pattern(rule.src, cfg.input_len, cfg.alphabet, rng);
    out.push_back(make_example(kind, rule, std::move(input), rule_id, split));
  }
}

/// Spreads `total` over `parts` as evenly as possible, remainder to the front.
std::vector<std::size_t> even_split(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, parts == 0 ? 0 : total / parts);
  for (std::size_t i = 0; i < (parts == 0 ? 0 : total % parts); ++i) ++out[i];
  return out;
}

SplitDataset gen_replace_dataset(TaskKind kind, const BasicTaskConfig& cfg, const std::vector<std::size_t>& train_counts,
                                 double noop_frac) {
  const std::size_t num_train_rules = train_counts.size();
  Rng rule_rng = stream_rng(cfg.seed, kRulesStream, 0);
  const auto rules = gen_rules(num_train_rules + cfg.test_instructions, cfg, rule_rng);

  const std::size_t train_total = std::accumulate(train_counts.begin(), train_counts.end(), std::size_t{0});
  const std::size_t test_total = cfg.test_instructions * cfg.test_examples_per_instruction;
  const auto train_noops = even_split(noop_count(noop_frac, train_total), num_train_rules);
  const auto test_noops = even_split(noop_count(noop_frac, test_total), cfg.test_instructions);

  SplitDataset data;
  data.train.reserve(train_total);
  for (std::size_t r = 0; r < num_train_rules; ++r) {
    Rng rng = stream_rng(cfg.seed, kTrainStream, r);
    const auto noops = std::min(train_noops[r], train_counts[r]);
    append_examples(data.train, kind, rules[r], static_cast<std::int64_t>(r), Split::train, train_counts[r], noops,
                    cfg, rng);
  }
  data.test.reserve(test_total);
  for (std::size_t t = 0; t < cfg.test_instructions; ++t) {
    Rng rng = stream_rng(cfg.seed, kTestStream, t);
    const std::size_t id = num_train_rules + t;
    append_examples(data.test, kind, rules[id], static_cast<std::int64_t>(id), Split::test,
                    cfg.test_examples_per_instruction, test_noops[t], cfg, rng);
  }
  return data;
}

}  // namespace

std::size_t noop_count(double frac, std::size_t total) {
  return static_cast<std::size_t>(std::llround(frac * static_cast<double>(total)));
}

SplitDataset gen_basic_dataset(const BasicTaskConfig& cfg) {
  validate(cfg);
  auto data = gen_replace_dataset(TaskKind::basic_replace, cfg,
                                  std::vector<std::size_t>(cfg.num_instructions, cfg.examples_per_instruction), 0.0);
  data.config = to_json(cfg);
  data.config["generator"] = "basic";
  return data;
}

SplitDataset gen_noop_dataset(const NoOpConfig& cfg) {
  validate(cfg.base);
  if (!(cfg.no_op_frac >= 0.0 && cfg.no_op_frac <= 1.0)) throw ValidationError("no_op_frac must lie in [0, 1]");
  const auto& base = cfg.base;
  const std::size_t total = base.num_instructions * base.examples_per_instruction;
  // A rule cannot hold more No-Ops than examples.
  const auto per_rule = even_split(noop_count(cfg.no_op_frac, total), base.num_instructions);
  if (!per_rule.empty() && per_rule.front() > base.examples_per_instruction) {
    throw ValidationError("no_op_frac too large for examples_per_instruction");
  }
  auto data = gen_replace_dataset(TaskKind::cond_replace, base,
                                  std::vector<std::size_t>(base.num_instructions, base.examples_per_instruction),
                                  cfg.no_op_frac);
  data.config = to_json(base);
  data.config["generator"] = "noop";
  data.config["no_op_frac"] = cfg.no_op_frac;
  return data;
}

std::vector<std::size_t> largest_remainder(const std::vector<double>& weights, std::size_t total) {
  std::vector<std::size_t> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw ValidationError("weights must have a positive sum");
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] / sum * static_cast<double>(total);
    const double floor_q = std::floor(quota);
    counts[i] = static_cast<std::size_t>(floor_q);
    remainder[i] = quota - floor_q;
    assigned += counts[i];
  }
  // Rounding can in principle push the floors past total; trim from the
  // smallest remainders in that case.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size()) {
    ++counts[order[i]];
    ++assigned;
  }
  for (std::size_t i = order.size(); assigned > total;) {
    i = (i == 0 ? order.size() : i) - 1;
    if (counts[order[i]] > 0) {
      --counts[order[i]];
      --assigned;
    }
  }
  return counts;
}

PowerLawDraw sample_powerlaw(const PowerLawConfig& cfg, Rng& rng) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) throw ValidationError("power-law alpha must be positive");
  if (cfg.num_instructions == 0) throw ValidationError("num_instructions must be positive");
  PowerLawDraw draw;
  draw.weights.resize(cfg.num_instructions);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& w : draw.weights) {
    const double u = 1.0 - unit(rng);  // (0, 1]
    w = std::pow(u, 1.0 / cfg.alpha);
  }
  // Extremely small alpha can underflow every weight to zero.
  if (std::all_of(draw.weights.begin(), draw.weights.end(), [](double w) { return w == 0.0; })) {
    throw ValidationError("power-law weights underflowed; alpha too small");
  }
  draw.counts = largest_remainder(draw.weights, cfg.total_examples);
  return draw;
}

std::vector<std::size_t> sample_powerlaw_counts(const PowerLawConfig& cfg, Rng& rng) {
  return sample_powerlaw(cfg, rng).counts;
}

SplitDataset gen_powerlaw_dataset(const PowerLawConfig& cfg, const BasicTaskConfig& base) {
  BasicTaskConfig adjusted = base;
  adjusted.num_instructions = cfg.num_instructions;
  adjusted.examples_per_instruction = 1;
  validate(adjusted);
  Rng rng = stream_rng(base.seed, kPowerLawStream, 0);
  const auto counts = sample_powerlaw_counts(cfg, rng);
  auto data = gen_replace_dataset(TaskKind::basic_replace, adjusted, counts, 0.0);
  for (auto* split : {&data.train, &data.test}) {
    for (auto& ex : *split) ex.meta.alpha = cfg.alpha;
  }
  data.config = to_json(adjusted);
  data.config.erase("examples_per_instruction");
  data.config["generator"] = "powerlaw";
  data.config["alpha"] = cfg.alpha;
  data.config["total_examples"] = cfg.total_examples;
  data.config["rule_counts"] = counts;
  return data;
}

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::repeated_chars:
      return "RepeatedChars";
    case FamilyKind::periodic:
      return "Periodic";
    case FamilyKind::mirrored:
      return "Mirrored";
  }
  return "?";
}

FamilyKind parse_family_kind(std::string_view name) {
  if (name == "RepeatedChars" || name == "repeated_chars" || name == "repeated") return FamilyKind::repeated_chars;
  if (name == "Periodic" || name == "periodic") return FamilyKind::periodic;
  if (name == "Mirrored" || name == "mirrored") return FamilyKind::mirrored;
  throw ValidationError("unknown semantic family: " + std::string(name));
}

std::string build_family_pattern(const SemanticFamily& family, std::string_view unit) {
  if (family.k < 1) throw ValidationError("family parameter k must be at least 1");
  const auto k = static_cast<std::size_t>(family.k);
  std::string out;
  out.reserve(unit.size() * k);
  switch (family.kind) {
    case FamilyKind::repeated_chars:
      for (char c : unit) out.append(k, c);
      break;
    case FamilyKind::periodic:
      for (std::size_t i = 0; i < k; ++i) out.append(unit);
      break;
    case FamilyKind::mirrored: {
      const std::string reversed(unit.rbegin(), unit.rend());
      for (std::size_t i = 0; i < k; ++i) out.append(i % 2 == 0 ? std::string(unit) : reversed);
      break;
    }
  }
  return out;
}

ConstrainedPattern gen_constrained_pattern(const SemanticFamily& family, std::size_t unit_len,
                                           std::string_view alphabet, Rng& rng) {
  if (unit_len == 0) throw ValidationError("unit_len must be positive");
  if (family.k < 1) throw ValidationError("family parameter k must be at least 1");
  if (alphabet.empty()) throw ValidationError("alphabet must be non-empty");
  std::string unit;
  if (family.kind == FamilyKind::repeated_chars) {
    if (unit_len > 1 && alphabet.size() < 2) {
      throw ValidationError("repeated-char units longer than 1 need at least two letters");
    }
    // Adjacent letters differ so every run has length exactly k.
    unit.push_back(alphabet[uniform_index(rng, alphabet.size())]);
    while (unit.size() < unit_len) {
      const auto pick = uniform_index(rng, alphabet.size() - 1);
      const auto prev = alphabet.find(unit.back());
      unit.push_back(alphabet[pick >= prev ? pick + 1 : pick]);
    }
  } else {
    unit = random_string(unit_len, alphabet, rng);
  }
  return {build_family_pattern(family, unit), unit};
}

bool satisfies_family(std::string_view pattern, const SemanticFamily& family, std::string_view unit) {
  if (family.k < 1 || unit.empty()) return false;
  if (build_family_pattern(family, unit) != pattern) return false;
  return family.kind != FamilyKind::repeated_chars || runs_of_exactly(pattern, family.k);
}

bool runs_of_exactly(std::string_view pattern, int k) {
  if (pattern.empty() || k < 1) return false;
  std::size_t i = 0;
  while (i < pattern.size()) {
    std::size_t j = i;
    while (j < pattern.size() && pattern[j] == pattern[i]) ++j;
    if (j - i != static_cast<std::size_t>(k)) return false;
    i = j;
  }
  return true;
}

namespace {

nlohmann::json families_json(const std::vector<FamilyCount>& fams) {
  auto arr = nlohmann::json::array();
  for (const auto& f : fams) arr.push_back({{"family", to_string(f.family.kind)}, {"k", f.family.k}, {"count", f.count}});
  return arr;
}

}  // namespace

SplitDataset gen_constrained_dataset(const SemanticTaskConfig& cfg) {
  validate_alphabet(cfg.alphabet);
  if (cfg.train.empty()) throw ValidationError("at least one training family is required");
  if (cfg.examples_per_instruction == 0) throw ValidationError("examples_per_instruction must be positive");
  for (const auto* group : {&cfg.train, &cfg.test}) {
    for (const auto& f : *group) {
      if (f.count == 0) throw ValidationError("family counts must be positive");
      if (f.family.k < 1) throw ValidationError("family parameter k must be at least 1");
      if (cfg.pattern_len % static_cast<std::size_t>(f.family.k) != 0) {
        throw ValidationError("pattern_len must be divisible by every family k");
      }
    }
  }
  if (cfg.pattern_len == 0 || cfg.pattern_len > cfg.input_len) {
    throw ValidationError("pattern_len must be positive and at most input_len");
  }

  struct PlannedRule {
    ReplaceRule rule;
    SemanticFamily family;
    std::string unit;
  };
  std::unordered_set<std::string> train_strings;  // every train src and dst
  std::unordered_set<std::string> srcs;
  Rng rule_rng = stream_rng(cfg.seed, kRulesStream, 0);

  auto draw_rules = [&](const std::vector<FamilyCount>& fams, bool is_test) {
    std::vector<PlannedRule> out;
    for (const auto& f : fams) {
      const std::size_t unit_len = cfg.pattern_len / static_cast<std::size_t>(f.family.k);
      const std::size_t max_attempts = 64 * f.count + 1024;
      std::size_t made = 0;
      for (std::size_t attempt = 0; made < f.count; ++attempt) {
        if (attempt >= max_attempts) {
          throw CapacityError("could not draw " + std::to_string(f.count) + " distinct " +
                              std::string(to_string(f.family.kind)) + " rules with k=" + std::to_string(f.family.k));
        }
        auto src = gen_constrained_pattern(f.family, unit_len, cfg.alphabet, rule_rng);
        std::string dst = cfg.constrain_dst ? gen_constrained_pattern(f.family, unit_len, cfg.alphabet, rule_rng).pattern
                                            : random_string(cfg.pattern_len, cfg.alphabet, rule_rng);
        if (srcs.contains(src.pattern)) continue;
        if (is_test && (train_strings.contains(src.pattern) || train_strings.contains(dst))) continue;
        srcs.insert(src.pattern);
        if (!is_test) {
          train_strings.insert(src.pattern);
          train_strings.insert(dst);
        }
        out.push_back({{std::move(src.pattern), std::move(dst)}, f.family, std::move(src.unit)});
        ++made;
      }
    }
    return out;
  };
  const auto train_rules = draw_rules(cfg.train, false);
  const auto test_rules = draw_rules(cfg.test, true);

  BasicTaskConfig shape;
  shape.input_len = cfg.input_len;
  shape.alphabet = cfg.alphabet;

  SplitDataset data;
  auto emit = [&](const std::vector<PlannedRule>& rules, std::size_t id_offset, Split split, std::size_t per_rule,
                  Stream stream, std::vector<Example>& out) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      Rng rng = stream_rng(cfg.seed, stream, r);
      const auto first = out.size();
      append_examples(out, TaskKind::basic_replace, rules[r].rule, static_cast<std::int64_t>(id_offset + r), split,
                      per_rule, 0, shape, rng);
      for (auto i = first; i < out.size(); ++i) {
        out[i].meta.family = std::string(to_string(rules[r].family.kind));
        out[i].meta.k = rules[r].family.k;
        out[i].meta.unit = rules[r].unit;
      }
    }
  };
  emit(train_rules, 0, Split::train, cfg.examples_per_instruction, kTrainStream, data.train);
  emit(test_rules, train_rules.size(), Split::test, cfg.test_examples_per_instruction, kTestStream, data.test);

  data.config = {{"generator", "semantic"},
                 {"input_len", cfg.input_len},
                 {"pattern_len", cfg.pattern_len},
                 {"alphabet", cfg.alphabet},
                 {"examples_per_instruction", cfg.examples_per_instruction},
                 {"test_examples_per_instruction", cfg.test_examples_per_instruction},
                 {"train_families", families_json(cfg.train)},
                 {"test_families", families_json(cfg.test)},
                 {"constrain_dst", cfg.constrain_dst},
                 {"seed", cfg.seed}};
  return data;
}

}  // namespace rewritelab::strings
