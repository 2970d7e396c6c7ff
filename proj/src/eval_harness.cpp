// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "rewritelab/errors.hpp"
#include "rewritelab/expr_rewrite.hpp"
#include "rewritelab/rng.hpp"
#include "rewritelab/string_tasks.hpp"
#include "rewritelab/text.hpp"
#include "rewritelab/trainer.hpp"

namespace rewritelab::eval {

std::string normalize(std::string_view text, bool strict) {
  std::string_view s = strict ? text : trim(text);
  if (s.ends_with(kEndMarker)) {
    s.remove_suffix(kEndMarker.size());
    if (!strict) s = trim(s);
  }
  return std::string(s);
}

bool exact_match(std::string_view prediction, std::string_view target, bool strict) {
  return normalize(prediction, strict) == normalize(target, strict);
}

std::vector<std::string> bucket_keys(const Example& ex, const EvalOptions& options) {
  std::vector<std::string> keys;
  keys.push_back("task=" + std::string(to_string(ex.task_kind)));
  keys.push_back(ex.meta.is_noop ? "noop=true" : "noop=false");
  if (options.train_rule_ids) {
    keys.push_back(options.train_rule_ids->contains(ex.meta.rule_id) ? "seen=yes" : "seen=no");
  }
  if (ex.meta.family) keys.push_back("family=" + *ex.meta.family);
  if (ex.meta.k) keys.push_back("k=" + std::to_string(*ex.meta.k));
  if (ex.meta.d_p) keys.push_back("d_p=" + std::to_string(*ex.meta.d_p));
  return keys;
}

Metrics score(const std::vector<std::string>& completions, const std::vector<Example>& test_set,
              const EvalOptions& options) {
  if (completions.size() != test_set.size()) {
    throw ProtocolError("got " + std::to_string(completions.size()) + " completions for " +
                        std::to_string(test_set.size()) + " prompts");
  }
  Metrics m;
  m.count = test_set.size();
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const bool ok = exact_match(completions[i], test_set[i].target, options.strict);
    m.correct += ok ? 1 : 0;
    for (const auto& key : bucket_keys(test_set[i], options)) {
      auto& b = m.buckets[key];
      ++b.count;
      b.correct += ok ? 1 : 0;
    }
  }
  m.overall_exact_match = m.count ? static_cast<double>(m.correct) / static_cast<double>(m.count) : 0.0;
  return m;
}

namespace {

std::vector<std::string> render_prompts(const std::vector<Example>& test_set, const PromptTemplate& tpl) {
  std::vector<std::string> prompts;
  prompts.reserve(test_set.size());
  for (const auto& ex : test_set) prompts.push_back(format_prompt(ex, tpl));
  return prompts;
}

/// Heuristics for completions that belong to a different prompt order.
std::vector<std::string> alignment_warnings(const std::vector<std::string>& prompts,
                                            const std::vector<std::string>& completions,
                                            const std::vector<Example>& test_set, bool strict) {
  std::vector<std::string> warnings;

  std::unordered_map<std::string, std::size_t> first_by_prompt;
  std::size_t conflicting = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    auto [it, inserted] = first_by_prompt.emplace(prompts[i], i);
    if (!inserted && normalize(completions[it->second], strict) != normalize(completions[i], strict)) ++conflicting;
  }
  if (conflicting > 0) {
    warnings.push_back(std::to_string(conflicting) +
                       " duplicate prompts received different completions; the completions may be out of order");
  }

  std::unordered_map<std::string, std::size_t> target_count;
  for (const auto& ex : test_set) ++target_count[normalize(ex.target, strict)];
  std::size_t foreign = 0;
  for (std::size_t i = 0; i < completions.size(); ++i) {
    const std::string c = normalize(completions[i], strict);
    if (c == normalize(test_set[i].target, strict)) continue;
    if (target_count.contains(c)) ++foreign;
  }
  if (!completions.empty() && static_cast<double>(foreign) >= 0.1 * static_cast<double>(completions.size())) {
    warnings.push_back(std::to_string(foreign) +
                       " completions equal the target of a different prompt; the completions may be out of order");
  }
  return warnings;
}

}  // namespace

Metrics evaluate(const ModelAdapter& adapter, const std::vector<Example>& test_set, const PromptTemplate& tpl,
                 const EvalOptions& options) {
  if (test_set.empty()) throw ValidationError("test set is empty");
  const auto prompts = render_prompts(test_set, resolve_template(tpl));
  const auto completions = adapter(prompts);
  if (completions.size() != prompts.size()) {
    throw ProtocolError("adapter returned " + std::to_string(completions.size()) + " completions for " +
                        std::to_string(prompts.size()) + " prompts");
  }
  return score(completions, test_set, options);
}

std::string oracle_answer(std::string_view prompt, const PromptTemplate& tpl) {
  const auto fields = parse_prompt(prompt, resolve_template(tpl));
  if (fields.rule.find("->") != std::string::npos) {
    return strings::apply_replace(fields.input, strings::parse_rule(fields.rule)).output;
  }
  if (fields.rule.find('=') != std::string::npos) {
    const auto rule = expr::parse_rule(fields.rule);
    return expr::render(expr::apply_abstract_rule(expr::parse(fields.input), rule).output);
  }
  throw ValidationError("cannot tell the task kind of rule '" + fields.rule + "'");
}

ModelAdapter oracle_adapter(PromptTemplate tpl) {
  tpl = resolve_template(tpl);
  return [tpl](const std::vector<std::string>& prompts) {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(oracle_answer(p, tpl));
    return out;
  };
}

ModelAdapter corrupting_adapter(ModelAdapter inner, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("corruption fraction must lie in [0, 1]");
  return [inner = std::move(inner), fraction, seed](const std::vector<std::string>& prompts) {
    auto out = inner(prompts);
    Rng rng = make_rng(seed, 0xC0);
    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(out.size())));
    for (std::size_t j = 0; j < n; ++j) {
      std::string& s = out[order[j]];
      if (s.empty()) {
        s = "#";
        continue;
      }
      const std::size_t pos = uniform_index(rng, s.size());
      s[pos] = s[pos] == '#' ? '%' : '#';
    }
    return out;
  };
}

ModelAdapter model_adapter(const nn::Transformer<float>& model, const nn::Vocab& vocab) {
  return [&model, &vocab](const std::vector<std::string>& prompts) {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(nn::complete(model, vocab, p));
    return out;
  };
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << escape_line(l) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_prompts(const std::filesystem::path& path, const std::vector<Example>& test_set,
                   const PromptTemplate& tpl) {
  write_lines(path, render_prompts(test_set, resolve_template(tpl)));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::size_t stop = end == std::string::npos ? text.size() : end;
    try {
      lines.push_back(unescape_line(std::string_view(text).substr(start, stop - start)));
    } catch (const ProtocolError& e) {
      throw ProtocolError(path.string() + " line " + std::to_string(lines.size() + 1) + ": " + e.what());
    }
    start = stop + 1;
  }
  return lines;
}

Metrics run_external(const std::filesystem::path& prompts_path, const std::filesystem::path& completions_path,
                     const std::vector<Example>& test_set, const PromptTemplate& tpl, const EvalOptions& options) {
  if (test_set.empty()) throw ValidationError("test set is empty");
  const auto expected = render_prompts(test_set, resolve_template(tpl));
  const auto prompts = read_lines(prompts_path);
  const auto completions = read_lines(completions_path);
  if (prompts.size() != expected.size()) {
    throw ProtocolError(prompts_path.string() + " has " + std::to_string(prompts.size()) + " lines, expected " +
                        std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (prompts[i] != expected[i]) {
      throw ProtocolError(prompts_path.string() + " line " + std::to_string(i + 1) +
                          " does not match the test set prompt at that index");
    }
  }
  if (completions.size() != prompts.size()) {
    const std::size_t line = std::min(completions.size(), prompts.size()) + 1;
    throw ProtocolError(completions_path.string() + " has " + std::to_string(completions.size()) +
                        " lines, expected " + std::to_string(prompts.size()) + " (first unmatched line " +
                        std::to_string(line) + ")");
  }
  Metrics m = score(completions, test_set, options);
  m.warnings = alignment_warnings(prompts, completions, test_set, options.strict);
  return m;
}

void write_report_csv(const std::filesystem::path& path, const Metrics& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bucket_key,count,exact_match\n";
  out << std::setprecision(17);
  out << "overall," << metrics.count << ',' << metrics.overall_exact_match << '\n';
  for (const auto& [key, b] : metrics.buckets) out << key << ',' << b.count << ',' << b.exact_match() << '\n';
}

nlohmann::ordered_json to_json(const Metrics& metrics) {
  nlohmann::ordered_json j;
  j["count"] = metrics.count;
  j["correct"] = metrics.correct;
  j["overall_exact_match"] = metrics.overall_exact_match;
  auto buckets = nlohmann::ordered_json::object();
  for (const auto& [key, b] : metrics.buckets) {
    buckets[key] = {{"count", b.count}, {"exact_match", b.exact_match()}};
  }
  j["buckets"] = std::move(buckets);
  j["warnings"] = metrics.warnings;
  return j;
}

}  // namespace rewritelab::eval
