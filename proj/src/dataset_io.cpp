// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/dataset_io.hpp"

#include <fstream>

#include "rewritelab/errors.hpp"

namespace rewritelab {

namespace fs = std::filesystem;

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::basic_replace:
      return "BasicReplace";
    case TaskKind::cond_replace:
      return "CondReplace";
    case TaskKind::markov:
      return "Markov";
    case TaskKind::expr_rewrite:
      return "ExprRewrite";
  }
  return "?";
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

TaskKind parse_task_kind(std::string_view name) {
  for (auto kind : {TaskKind::basic_replace, TaskKind::cond_replace, TaskKind::markov, TaskKind::expr_rewrite}) {
    if (to_string(kind) == name) return kind;
  }
  throw ValidationError("unknown task kind: " + std::string(name));
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split: " + std::string(name));
}

namespace {

constexpr std::string_view kRule = "{rule}";
constexpr std::string_view kInput = "{input}";

std::size_t count_of(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

/// Literal text of the template with the placeholders cut out.
std::vector<std::string> literal_segments(const PromptTemplate& tpl) {
  std::vector<std::string> segs;
  std::string_view rest = tpl.format;
  while (!rest.empty()) {
    const auto r = rest.find(kRule);
    const auto i = rest.find(kInput);
    const auto next = std::min(r, i);
    if (next == std::string_view::npos) {
      segs.emplace_back(rest);
      break;
    }
    if (next > 0) segs.emplace_back(rest.substr(0, next));
    rest.remove_prefix(next + (next == r ? kRule.size() : kInput.size()));
  }
  return segs;
}

void check_field(std::string_view field, const char* name, const PromptTemplate& tpl) {
  if (field.find('\n') != std::string_view::npos) {
    throw ValidationError(std::string(name) + " field contains a newline");
  }
  for (const auto& seg : literal_segments(tpl)) {
    if (field.find(seg) != std::string_view::npos) {
      throw ValidationError(std::string(name) + " field collides with template delimiter '" + seg + "'");
    }
  }
  if (field.find(tpl.cue) != std::string_view::npos) {
    throw ValidationError(std::string(name) + " field contains the output cue");
  }
}

}  // namespace

PromptTemplate resolve_template(const PromptTemplate& tpl) {
  if (tpl.format.empty()) return PromptTemplate{};
  PromptTemplate out = tpl;
  if (out.cue.empty()) throw ValidationError("template cue must be non-empty");
  if (count_of(out.format, kRule) != 1 || count_of(out.format, kInput) != 1) {
    throw ValidationError("template must contain {rule} and {input} exactly once");
  }
  if (!std::string_view(out.format).ends_with(out.cue) || count_of(out.format, out.cue) != 1) {
    throw ValidationError("template must end with its cue and contain it only once");
  }
  if (out.format.find(kInput) < out.format.find(kRule)) throw ValidationError("{rule} must precede {input}");
  return out;
}

std::string format_prompt(const Example& ex, const PromptTemplate& raw) {
  const PromptTemplate tpl = resolve_template(raw);
  check_field(ex.instruction, "rule", tpl);
  check_field(ex.input, "input", tpl);
  std::string out = tpl.format;
  out.replace(out.find(kRule), kRule.size(), ex.instruction);
  out.replace(out.find(kInput), kInput.size(), ex.input);
  return out;
}

std::string format_training_text(const Example& ex, const PromptTemplate& raw) {
  const PromptTemplate tpl = resolve_template(raw);
  check_field(ex.target, "target", tpl);
  return format_prompt(ex, tpl) + ex.target;
}

PromptFields parse_prompt(std::string_view prompt, const PromptTemplate& raw) {
  const PromptTemplate tpl = resolve_template(raw);
  const std::string_view fmt = tpl.format;
  const auto rpos = fmt.find(kRule);
  const auto ipos = fmt.find(kInput);
  const std::string_view head = fmt.substr(0, rpos);
  const std::string_view mid = fmt.substr(rpos + kRule.size(), ipos - rpos - kRule.size());
  const std::string_view tail = fmt.substr(ipos + kInput.size());
  if (!prompt.starts_with(head) || !prompt.ends_with(tail) || prompt.size() < head.size() + mid.size() + tail.size()) {
    throw ProtocolError("prompt does not follow the template");
  }
  std::string_view body = prompt.substr(head.size(), prompt.size() - head.size() - tail.size());
  const auto cut = mid.empty() ? std::string_view::npos : body.find(mid);
  if (cut == std::string_view::npos) throw ProtocolError("prompt does not follow the template");
  return PromptFields{std::string(body.substr(0, cut)), std::string(body.substr(cut + mid.size()))};
}

std::pair<std::string, std::string> split_at_cue(std::string_view text, const PromptTemplate& raw) {
  const PromptTemplate tpl = resolve_template(raw);
  // The cue occurs once in the template and never inside the rule or input
  // fields, so its first occurrence is the real one.
  const auto cue_pos = text.find(tpl.cue);
  if (cue_pos == std::string_view::npos) throw ValidationError("text contains no output cue");
  const auto end = cue_pos + tpl.cue.size();
  return {std::string(text.substr(0, end)), std::string(text.substr(end))};
}

nlohmann::ordered_json to_json(const Example& ex) {
  nlohmann::ordered_json meta;
  meta["rule_id"] = ex.meta.rule_id;
  meta["is_noop"] = ex.meta.is_noop;
  if (ex.meta.family) meta["family"] = *ex.meta.family;
  if (ex.meta.k) meta["k"] = *ex.meta.k;
  if (ex.meta.unit) meta["unit"] = *ex.meta.unit;
  if (ex.meta.alpha) meta["alpha"] = *ex.meta.alpha;
  if (ex.meta.d) meta["d"] = *ex.meta.d;
  if (ex.meta.d_p) meta["d_p"] = *ex.meta.d_p;
  meta["split"] = to_string(ex.meta.split);

  nlohmann::ordered_json j;
  j["task_kind"] = to_string(ex.task_kind);
  j["instruction"] = ex.instruction;
  j["input"] = ex.input;
  j["target"] = ex.target;
  j["meta"] = std::move(meta);
  return j;
}

Example example_from_json(const nlohmann::json& j) {
  Example ex;
  ex.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  ex.instruction = j.at("instruction").get<std::string>();
  ex.input = j.at("input").get<std::string>();
  ex.target = j.at("target").get<std::string>();
  const auto& m = j.at("meta");
  ex.meta.rule_id = m.at("rule_id").get<std::int64_t>();
  ex.meta.is_noop = m.at("is_noop").get<bool>();
  if (m.contains("family")) ex.meta.family = m["family"].get<std::string>();
  if (m.contains("k")) ex.meta.k = m["k"].get<int>();
  if (m.contains("unit")) ex.meta.unit = m["unit"].get<std::string>();
  if (m.contains("alpha")) ex.meta.alpha = m["alpha"].get<double>();
  if (m.contains("d")) ex.meta.d = m["d"].get<int>();
  if (m.contains("d_p")) ex.meta.d_p = m["d_p"].get<int>();
  ex.meta.split = parse_split(m.at("split").get<std::string>());
  return ex;
}

void write_examples(const fs::path& file, const std::vector<Example>& examples) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<Example> read_examples(const fs::path& file, Split expected) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(file.filename().string() + ": malformed record: " + e.what(), line_no);
    }
    if (out.back().meta.split != expected) {
      throw ParseError(file.filename().string() + ": record split does not match file", line_no);
    }
  }
  return out;
}

void write_dataset(const fs::path& dir, const SplitDataset& data) {
  fs::create_directories(dir);
  write_examples(dir / "train.jsonl", data.train);
  write_examples(dir / "test.jsonl", data.test);
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["generator"] = data.config;
  manifest["counts"] = {{"train", data.train.size()}, {"test", data.test.size()}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

SplitDataset read_dataset(const fs::path& dir) {
  SplitDataset data;
  {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
      throw ParseError(std::string("manifest.json: ") + e.what(), 0);
    }
    if (manifest.value("format_version", 0) != kFormatVersion) {
      throw ValidationError("unsupported manifest format_version in " + dir.string());
    }
    data.config = manifest.at("generator");
  }
  data.train = read_examples(dir / "train.jsonl", Split::train);
  data.test = read_examples(dir / "test.jsonl", Split::test);
  return data;
}

SplitDataset split_by_rule(std::vector<Example> examples, const std::set<std::int64_t>& test_rule_ids) {
  const auto present = rule_ids(examples);
  for (auto id : test_rule_ids) {
    if (!present.contains(id)) throw ValidationError("requested test rule " + std::to_string(id) + " is absent");
  }
  SplitDataset out;
  for (auto& ex : examples) {
    if (test_rule_ids.contains(ex.meta.rule_id)) {
      ex.meta.split = Split::test;
      out.test.push_back(std::move(ex));
    } else {
      ex.meta.split = Split::train;
      out.train.push_back(std::move(ex));
    }
  }
  return out;
}

std::set<std::int64_t> rule_ids(const std::vector<Example>& examples) {
  std::set<std::int64_t> ids;
  for (const auto& ex : examples) ids.insert(ex.meta.rule_id);
  return ids;
}

}  // namespace rewritelab
