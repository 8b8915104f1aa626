#include "paffa/evalkit.hpp"

#include <cmath>
#include <sstream>

namespace paffa {

namespace {

const html::Node* gold_node(const AnnotatedStep& gold, const html::Document& reference) {
  if (gold.gold_locator.has_value()) return reference.resolve(*gold.gold_locator);
  const html::Node* node = reference.by_id(gold.gold_key);
  if (node != nullptr) return node;
  return reference.resolve(Locator{LocatorStrategy::by_css, gold.gold_key});
}

bool element_matches(const PredictedStep& predicted, const AnnotatedStep& gold,
                     const html::Document* reference, MatchMode mode) {
  if (!gold.gold_key.empty() && predicted.element_key == gold.gold_key) return true;
  if (mode == MatchMode::exact) return false;
  if (reference == nullptr) return false;
  const html::Node* target = gold_node(gold, *reference);
  if (target == nullptr) return false;
  for (const Locator& locator : predicted.locators) {
    if (reference->resolve(locator) == target) return true;
  }
  return false;
}

}  // namespace

ComparisonReport compare_traces(const std::vector<PredictedStep>& predicted,
                                const std::vector<AnnotatedStep>& gold,
                                const html::Document* reference, MatchMode mode) {
  if (gold.empty()) {
    throw Error(ErrorCode::empty_gold, "comparison needs at least one annotated step");
  }
  ComparisonReport report;
  std::size_t element_hits = 0;
  std::size_t pair_hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    StepVerdict verdict;
    if (i < predicted.size()) {
      const PredictedStep& pred = predicted[i];
      verdict.element_ok = element_matches(pred, gold[i], reference, mode);
      // a correct pair requires a correct element
      verdict.pair_ok = verdict.element_ok && pred.action == gold[i].gold_action;
      if (verdict.pair_ok && gold[i].gold_value.has_value()) {
        verdict.pair_ok = pred.value.has_value() && *pred.value == *gold[i].gold_value;
      }
    }
    element_hits += verdict.element_ok ? 1 : 0;
    pair_hits += verdict.pair_ok ? 1 : 0;
    report.verdicts.push_back(verdict);
  }
  report.element_accuracy = static_cast<double>(element_hits) / static_cast<double>(gold.size());
  report.step_accuracy = static_cast<double>(pair_hits) / static_cast<double>(gold.size());
  return report;
}

double element_accuracy(const std::vector<PredictedStep>& predicted,
                        const std::vector<AnnotatedStep>& gold, const html::Document* reference,
                        MatchMode mode) {
  return compare_traces(predicted, gold, reference, mode).element_accuracy;
}

double step_accuracy(const std::vector<PredictedStep>& predicted,
                     const std::vector<AnnotatedStep>& gold, const html::Document* reference,
                     MatchMode mode) {
  return compare_traces(predicted, gold, reference, mode).step_accuracy;
}

TokenReport token_report(const TokenLedger& ledger, long long baseline_tokens_per_call,
                         long long baseline_calls) {
  if (baseline_calls < 1 || baseline_tokens_per_call < 1) {
    throw Error(ErrorCode::zero_baseline, "baseline needs tokens-per-call >= 1 and calls >= 1");
  }
  TokenReport report;
  report.baseline_tokens_per_call = baseline_tokens_per_call;
  report.baseline_calls = baseline_calls;
  report.baseline_total = baseline_tokens_per_call * baseline_calls;
  report.paffa_total = ledger.total_tokens();
  report.paffa_calls = static_cast<long long>(ledger.size());
  report.estimated = ledger.any_estimated();
  report.reduction = 1.0 - static_cast<double>(report.paffa_total) /
                               static_cast<double>(report.baseline_total);
  double percent = std::round(report.reduction * 1000.0) / 10.0;
  std::ostringstream out;
  out.precision(1);
  out << std::fixed << percent << "%";
  report.reduction_percent = out.str();
  return report;
}

json token_report_to_json(const TokenReport& report) {
  return json{{"baseline",
               json{{"tokens-per-call", report.baseline_tokens_per_call},
                    {"calls", report.baseline_calls},
                    {"total", report.baseline_total}}},
              {"paffa", json{{"total", report.paffa_total}, {"calls", report.paffa_calls}}},
              {"reduction", report.reduction},
              {"reduction-percent", report.reduction_percent},
              {"estimated", report.estimated}};
}

std::string token_report_to_text(const TokenReport& report) {
  std::ostringstream out;
  out << "tokens/call x calls -> total\n";
  out << "baseline  " << report.baseline_tokens_per_call << " x " << report.baseline_calls
      << " -> " << report.baseline_total << "\n";
  out << "paffa     " << report.paffa_total << " over " << report.paffa_calls << " call(s)\n";
  out << "reduction " << report.reduction_percent;
  if (report.estimated) out << " (token counts partly estimated)";
  out << "\n";
  return out.str();
}

RubricScores rubric_score(const ActionScript& script, const std::string& task,
                          const std::optional<std::string>& reference,
                          const PromptLibrary& prompts, Gateway& gateway) {
  ValidationReport validation = validate_script(script);
  if (!validation.ok) {
    throw Error(ErrorCode::invalid_script, validation.to_string());
  }
  const std::string script_text = script_to_json(script).dump(2);
  Prompt prompt = prompts.render("rubric", {{"task", task},
                                            {"script", script_text},
                                            {"reference", reference.value_or("(none provided)")}});
  prompt.key_slots = {"rubric", task, jsonio::fnv1a_hex(script_text)};

  auto parse_scores = [](const std::string& reply) -> std::optional<RubricScores> {
    json doc = json::parse(reply, nullptr, false);
    RubricScores scores;
    if (!doc.is_discarded() && doc.is_object() && doc.contains("alignment") &&
        doc.contains("fidelity") && doc.contains("efficiency")) {
      scores.alignment = doc["alignment"].get<int>();
      scores.fidelity = doc["fidelity"].get<int>();
      scores.efficiency = doc["efficiency"].get<int>();
      return scores;
    }
    // plain-text form: the first three integers, e.g. "4 / 3 / 3"
    std::vector<int> numbers;
    std::string digits;
    for (char c : reply) {
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits.push_back(c);
      } else if (!digits.empty()) {
        numbers.push_back(std::stoi(digits));
        digits.clear();
      }
    }
    if (!digits.empty()) numbers.push_back(std::stoi(digits));
    if (numbers.size() < 3) return std::nullopt;
    scores.alignment = numbers[0];
    scores.fidelity = numbers[1];
    scores.efficiency = numbers[2];
    return scores;
  };

  std::optional<RubricScores> scores;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply = gateway.complete(prompt, {ExchangeTag::synthesis});
    scores = parse_scores(reply);
    if (!scores.has_value()) {
      if (attempt >= 1) {
        throw Error(ErrorCode::llm_reply_unparseable, "judge reply has no three scores");
      }
      prompt.user_text += "\n\nReply with the three integer scores only.";
      prompt.key_slots.push_back("retry");
      continue;
    }
    auto in_range = [](int score) { return score >= 1 && score <= 5; };
    if (in_range(scores->alignment) && in_range(scores->fidelity) && in_range(scores->efficiency)) {
      return *scores;
    }
    if (attempt >= 1) {
      throw Error(ErrorCode::score_out_of_range, "scores must lie in [1,5]");
    }
    prompt.user_text += "\n\nEvery score must be an integer between 1 and 5.";
    prompt.key_slots.push_back("retry");
    scores.reset();
  }
  throw Error(ErrorCode::score_out_of_range, "scores must lie in [1,5]");
}

std::vector<AnnotatedStep> gold_from_document(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"schema-version", "steps"}, "gold trace");
  jsonio::require_schema_version(doc, "gold trace");
  std::vector<AnnotatedStep> out;
  for (const json& item : jsonio::require(doc, "steps", "gold trace")) {
    jsonio::reject_unknown_fields(item, {"gold-element", "gold-action", "gold-value"}, "gold step");
    AnnotatedStep step;
    const json& element = jsonio::require(item, "gold-element", "gold step");
    if (element.is_string()) {
      step.gold_key = element.get<std::string>();
    } else {
      step.gold_locator = locator_from_json(element);
    }
    step.gold_action = step_kind_from_string(jsonio::require_string(item, "gold-action", "gold step"));
    if (item.contains("gold-value")) step.gold_value = item.at("gold-value").get<std::string>();
    out.push_back(std::move(step));
  }
  return out;
}

std::vector<PredictedStep> predicted_from_document(const json& doc) {
  jsonio::reject_unknown_fields(doc, {"schema-version", "steps"}, "predicted trace");
  jsonio::require_schema_version(doc, "predicted trace");
  std::vector<PredictedStep> out;
  for (const json& item : jsonio::require(doc, "steps", "predicted trace")) {
    jsonio::reject_unknown_fields(item, {"element-key", "locators", "action", "value"},
                                  "predicted step");
    PredictedStep step;
    step.element_key = jsonio::require_string(item, "element-key", "predicted step");
    if (item.contains("locators")) {
      for (const json& locator : item.at("locators")) {
        step.locators.push_back(locator_from_json(locator));
      }
    }
    step.action = step_kind_from_string(jsonio::require_string(item, "action", "predicted step"));
    if (item.contains("value")) step.value = item.at("value").get<std::string>();
    out.push_back(std::move(step));
  }
  return out;
}

json comparison_to_json(const ComparisonReport& report) {
  json verdicts = json::array();
  for (const StepVerdict& verdict : report.verdicts) {
    verdicts.push_back(json{{"element-ok", verdict.element_ok}, {"pair-ok", verdict.pair_ok}});
  }
  return json{{"element-accuracy", report.element_accuracy},
              {"step-accuracy", report.step_accuracy},
              {"verdicts", std::move(verdicts)}};
}

std::string comparison_to_text(const ComparisonReport& report) {
  std::ostringstream out;
  out << "step  element  pair\n";
  for (std::size_t i = 0; i < report.verdicts.size(); ++i) {
    out << i << "     " << (report.verdicts[i].element_ok ? "ok     " : "wrong  ") << "  "
        << (report.verdicts[i].pair_ok ? "ok" : "wrong") << "\n";
  }
  out << "element accuracy " << report.element_accuracy << "\n";
  out << "step accuracy    " << report.step_accuracy << "\n";
  return out.str();
}

}  // namespace paffa
