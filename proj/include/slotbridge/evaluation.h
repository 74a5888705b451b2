// Copyright 2026 The Slotbridge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Bilingual retrieval metrics and the injected-versus-zeroed comparison.

#ifndef SLOTBRIDGE_EVALUATION_H_
#define SLOTBRIDGE_EVALUATION_H_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slotbridge/data.h"
#include "slotbridge/models.h"
#include "slotbridge/projector.h"
#include "slotbridge/stage_b.h"

namespace slotbridge {

struct RetrievalReport {
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double r_at_10 = 0.0;
  double mrr = 0.0;
  double mean_rank = 0.0;
  int n = 0;
  int ties = 0;  // queries whose gold score ties another candidate
};

// Rank of the gold candidate (the diagonal) in each row of a square score
// matrix: 1 + #{j : s_ij > s_ii} + #{j < i : s_ij == s_ii}. Equal scores
// are thus ordered by candidate index.
std::vector<int> GoldRanks(const Matrix& scores, int* ties = nullptr);

// Throws std::invalid_argument for an empty rank list or a rank < 1.
RetrievalReport ReportFromRanks(const std::vector<int>& ranks);

// Cosine similarity of every query row with every candidate row.
Matrix CosineScores(const Matrix& queries, const Matrix& candidates);

struct RetrievalResult {
  RetrievalReport report;
  std::vector<int> ranks;
};

// Projects each source sentence and ranks every pair's teacher vector
// (under the one given instruction) by cosine. Requires at least 2 pairs;
// duplicate target sentences are logged.
RetrievalResult EvaluateRetrieval(const std::vector<SentencePair>& pairs,
                                  const FrozenModels& models, const Projector& projector,
                                  std::string_view instruction,
                                  const HiddenOptions& teacher = {});

struct UsageRow {
  std::string pair_id;
  std::string template_name;
  double loss_injected = 0.0;
  double loss_zeroed = 0.0;
  double delta = 0.0;  // loss_injected - loss_zeroed
};

struct UsageComparison {
  std::vector<UsageRow> rows;
  double usage_rate = 0.0;  // fraction of rows with delta < 0
  double mean_gain = 0.0;   // mean of loss_zeroed - loss_injected
};

UsageComparison CompareInjectedVsZeroed(const std::vector<StageBExample>& examples,
                                        const FrozenModels& models,
                                        const Projector& projector,
                                        StageBModules& modules);

// Report files. The metric tables carry (metric, value, n, config_hash).
nlohmann::json RetrievalReportJson(const RetrievalReport& r, const std::string& config_hash);
std::string RetrievalReportTsv(const RetrievalReport& r, const std::string& config_hash);
std::string RankListTsv(const std::vector<SentencePair>& pairs, const std::vector<int>& ranks);
nlohmann::json UsageJson(const UsageComparison& u, const std::string& config_hash);
std::string UsageTsv(const UsageComparison& u);

}  // namespace slotbridge

#endif  // SLOTBRIDGE_EVALUATION_H_
