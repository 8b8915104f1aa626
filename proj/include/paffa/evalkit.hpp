#pragma once

#include <optional>
#include <string>
#include <vector>

#include "paffa/dsl.hpp"
#include "paffa/gateway.hpp"
#include "paffa/html.hpp"

namespace paffa {

/// One annotated reference step: the element that should have been acted on
/// (by key or by locator), the action kind, and optionally the typed value.
struct AnnotatedStep {
  std::string gold_key;                 // element key, when the annotation uses keys
  std::optional<Locator> gold_locator;  // locator form of the annotation
  StepKind gold_action = StepKind::click;
  std::optional<std::string> gold_value;
};

struct PredictedStep {
  std::string element_key;
  LocatorChain locators;
  StepKind action = StepKind::click;
  std::optional<std::string> value;
};

/// exact: element keys must be equal. inexact: any predicted locator that
/// resolves to the annotated element on the reference page also counts,
/// admitting functionally correct but differently-addressed paths.
enum class MatchMode { exact, inexact };

struct StepVerdict {
  bool element_ok = false;
  bool pair_ok = false;
};

struct ComparisonReport {
  double element_accuracy = 0.0;
  double step_accuracy = 0.0;
  std::vector<StepVerdict> verdicts;
};

/// Fraction of gold steps whose interactive element was identified.
double element_accuracy(const std::vector<PredictedStep>& predicted,
                        const std::vector<AnnotatedStep>& gold,
                        const html::Document* reference = nullptr,
                        MatchMode mode = MatchMode::inexact);

/// Fraction of gold steps whose element-action pair is right (value compared
/// when the annotation carries one). Never exceeds element accuracy.
double step_accuracy(const std::vector<PredictedStep>& predicted,
                     const std::vector<AnnotatedStep>& gold,
                     const html::Document* reference = nullptr,
                     MatchMode mode = MatchMode::inexact);

ComparisonReport compare_traces(const std::vector<PredictedStep>& predicted,
                                const std::vector<AnnotatedStep>& gold,
                                const html::Document* reference = nullptr,
                                MatchMode mode = MatchMode::inexact);

struct TokenReport {
  long long baseline_tokens_per_call = 0;
  long long baseline_calls = 0;
  long long baseline_total = 0;
  long long paffa_total = 0;
  long long paffa_calls = 0;
  double reduction = 0.0;          // 1 - paffa/baseline
  std::string reduction_percent;   // e.g. "87.3%"
  bool estimated = false;          // any count in the ledger was estimated
};

/// Exact-arithmetic deployment cost comparison against a per-call baseline.
TokenReport token_report(const TokenLedger& ledger, long long baseline_tokens_per_call,
                         long long baseline_calls);

json token_report_to_json(const TokenReport& report);
std::string token_report_to_text(const TokenReport& report);

struct RubricScores {
  int alignment = 0;   // functional goal completion, 1-5
  int fidelity = 0;    // faithfulness of the steps to the needed actions, 1-5
  int efficiency = 0;  // directness of the interaction path, 1-5
};

/// One judge call scoring a script on the three rubric dimensions. The
/// reference sequence, when given, is context for the judge only.
RubricScores rubric_score(const ActionScript& script, const std::string& task,
                          const std::optional<std::string>& reference,
                          const PromptLibrary& prompts, Gateway& gateway);

// annotated-trace file format (gold + predicted)
std::vector<AnnotatedStep> gold_from_document(const json& doc);
std::vector<PredictedStep> predicted_from_document(const json& doc);
json comparison_to_json(const ComparisonReport& report);
std::string comparison_to_text(const ComparisonReport& report);

}  // namespace paffa
