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

#include "slotbridge/evaluation.h"

#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "slotbridge/stage_a.h"

namespace slotbridge {

std::vector<int> GoldRanks(const Matrix& scores, int* ties) {
  if (scores.rows() != scores.cols()) {
    throw std::invalid_argument("GoldRanks: score matrix must be square");
  }
  std::vector<int> ranks(static_cast<size_t>(scores.rows()));
  int tied = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double gold = scores(i, i);
    int rank = 1;
    bool tie = false;
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      if (j == i) continue;
      if (scores(i, j) > gold) {
        ++rank;
      } else if (scores(i, j) == gold) {
        tie = true;
        if (j < i) ++rank;
      }
    }
    tied += tie;
    ranks[i] = rank;
  }
  if (ties != nullptr) *ties = tied;
  return ranks;
}

RetrievalReport ReportFromRanks(const std::vector<int>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("no ranks");
  RetrievalReport r;
  r.n = static_cast<int>(ranks.size());
  int hit1 = 0, hit5 = 0, hit10 = 0;
  double rr = 0.0, sum = 0.0;
  for (int k : ranks) {
    if (k < 1) throw std::invalid_argument("rank must be >= 1");
    hit1 += k <= 1;
    hit5 += k <= 5;
    hit10 += k <= 10;
    rr += 1.0 / k;
    sum += k;
  }
  r.r_at_1 = static_cast<double>(hit1) / r.n;
  r.r_at_5 = static_cast<double>(hit5) / r.n;
  r.r_at_10 = static_cast<double>(hit10) / r.n;
  r.mrr = rr / r.n;
  r.mean_rank = sum / r.n;
  return r;
}

Matrix CosineScores(const Matrix& queries, const Matrix& candidates) {
  if (queries.cols() != candidates.cols()) {
    throw std::invalid_argument("CosineScores: dim mismatch");
  }
  const Matrix q = queries.rowwise().normalized();
  const Matrix c = candidates.rowwise().normalized();
  return q * c.transpose();
}

RetrievalResult EvaluateRetrieval(const std::vector<SentencePair>& pairs,
                                  const FrozenModels& models, const Projector& projector,
                                  std::string_view instruction,
                                  const HiddenOptions& teacher) {
  if (pairs.size() < 2) throw std::invalid_argument("retrieval needs at least 2 pairs");
  std::set<std::string> seen;
  for (const SentencePair& p : pairs) {
    if (!seen.insert(p.target_text).second) {
      spdlog::warn("duplicate target sentence in eval set ({}); gold rank is ambiguous", p.id);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Matrix z(n, models.encoder->hidden_dim());
  Matrix h(n, models.decoder->hidden_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    z.row(i) = EncodeSource(models, pairs[i].source_text);
    h.row(i) = PairTeacher(models, pairs[i], instruction, teacher);
  }
  RetrievalResult out;
  int ties = 0;
  out.ranks = GoldRanks(CosineScores(projector.ProjectBatch(z), h), &ties);
  out.report = ReportFromRanks(out.ranks);
  out.report.ties = ties;
  if (ties > 0) spdlog::info("{} retrieval queries had tied gold scores", ties);
  return out;
}

UsageComparison CompareInjectedVsZeroed(const std::vector<StageBExample>& examples,
                                        const FrozenModels& models,
                                        const Projector& projector,
                                        StageBModules& modules) {
  UsageComparison out;
  int used = 0;
  double gain = 0.0;
  for (const StageBExample& ex : examples) {
    const ExampleLosses l = EvaluateExample(models, projector, modules, ex);
    UsageRow row{ex.pair_id, TemplateName(ex.template_id), l.injected, l.zeroed,
                 l.injected - l.zeroed};
    used += row.delta < 0.0;
    gain += l.zeroed - l.injected;
    out.rows.push_back(std::move(row));
  }
  if (!examples.empty()) {
    out.usage_rate = static_cast<double>(used) / examples.size();
    out.mean_gain = gain / examples.size();
  }
  return out;
}

nlohmann::json RetrievalReportJson(const RetrievalReport& r, const std::string& config_hash) {
  nlohmann::ordered_json metrics = nlohmann::ordered_json::array();
  const std::pair<const char*, double> rows[] = {{"r_at_1", r.r_at_1},
                                                 {"r_at_5", r.r_at_5},
                                                 {"r_at_10", r.r_at_10},
                                                 {"mrr", r.mrr},
                                                 {"mean_rank", r.mean_rank}};
  for (const auto& [name, value] : rows) {
    metrics.push_back({{"metric", name}, {"value", value}, {"n", r.n},
                       {"config_hash", config_hash}});
  }
  return {{"kind", "retrieval"}, {"n", r.n}, {"ties", r.ties},
          {"config_hash", config_hash}, {"metrics", metrics}};
}

std::string RetrievalReportTsv(const RetrievalReport& r, const std::string& config_hash) {
  std::string out = "metric\tvalue\tn\tconfig_hash\n";
  const std::pair<const char*, double> rows[] = {{"r_at_1", r.r_at_1},
                                                 {"r_at_5", r.r_at_5},
                                                 {"r_at_10", r.r_at_10},
                                                 {"mrr", r.mrr},
                                                 {"mean_rank", r.mean_rank}};
  for (const auto& [name, value] : rows) {
    out += fmt::format("{}\t{}\t{}\t{}\n", name, value, r.n, config_hash);
  }
  return out;
}

std::string RankListTsv(const std::vector<SentencePair>& pairs, const std::vector<int>& ranks) {
  if (pairs.size() != ranks.size()) throw std::invalid_argument("RankListTsv: size mismatch");
  std::string out = "query\tid\trank\n";
  for (size_t i = 0; i < ranks.size(); ++i) {
    out += fmt::format("{}\t{}\t{}\n", i, pairs[i].id, ranks[i]);
  }
  return out;
}

nlohmann::json UsageJson(const UsageComparison& u, const std::string& config_hash) {
  return {{"kind", "usage"},
          {"n", u.rows.size()},
          {"usage_rate", u.usage_rate},
          {"mean_gain", u.mean_gain},
          {"config_hash", config_hash}};
}

std::string UsageTsv(const UsageComparison& u) {
  std::string out = "id\ttemplate\tloss_injected\tloss_zeroed\tdelta\n";
  for (const UsageRow& r : u.rows) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.pair_id, r.template_name, r.loss_injected,
                       r.loss_zeroed, r.delta);
  }
  return out;
}

}  // namespace slotbridge
