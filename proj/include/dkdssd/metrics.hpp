// dkdssd/metrics.hpp

// Copyright 2026  The dkdssd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Equal error rate and per-condition breakdowns.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkd {

struct TrialScore {
  std::string utt_id;
  double score = 0;  // higher = more bonafide
  bool bonafide = false;
  std::string noise_id;  // "" for clean
  double snr_db = std::numeric_limits<double>::quiet_NaN();
};

struct EerResult {
  double eer = 0;
  double threshold = 0;
};

/// FRR(t) = P(bonafide < t), FAR(t) = P(spoof >= t), swept over every
/// distinct score plus +inf. Where the curves cross between two operating
/// points the EER is linearly interpolated.
inline EerResult ComputeEer(const std::vector<TrialScore>& trials) {
  std::vector<std::pair<double, bool>> s;
  s.reserve(trials.size());
  std::size_t nb = 0;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw std::invalid_argument("eer: non-finite score for " + t.utt_id);
    s.emplace_back(t.score, t.bonafide);
    nb += t.bonafide;
  }
  const std::size_t ns = s.size() - nb;
  if (nb == 0 || ns == 0) throw std::invalid_argument("eer: need trials of both classes");
  std::sort(s.begin(), s.end());
  // Walk thresholds upward; before threshold s[i], everything below it is rejected.
  std::size_t b_below = 0, s_below = 0;
  double prev_frr = 0, prev_far = 1, prev_t = s.front().first;
  std::size_t i = 0;
  while (true) {
    const bool at_end = i == s.size();
    const double t = at_end ? std::numeric_limits<double>::infinity() : s[i].first;
    const double frr = static_cast<double>(b_below) / nb;
    const double far = static_cast<double>(ns - s_below) / ns;
    if (frr >= far) {
      if (frr == far) return {frr, at_end ? prev_t : t};
      const double d0 = prev_far - prev_frr, d1 = frr - far;
      const double a = d0 / (d0 + d1);
      const double thr = at_end ? prev_t : prev_t + a * (t - prev_t);
      return {prev_frr + a * (frr - prev_frr), thr};
    }
    prev_frr = frr;
    prev_far = far;
    prev_t = t;
    // Tied scores form one threshold step.
    const double v = s[i].first;
    while (i < s.size() && s[i].first == v) {
      (s[i].second ? b_below : s_below) += 1;
      ++i;
    }
  }
}

struct EerCell {
  std::size_t trials = 0;
  bool defined = false;
  double eer = std::numeric_limits<double>::quiet_NaN();
};

inline EerCell EerOf(const std::vector<TrialScore>& trials) {
  EerCell c;
  c.trials = trials.size();
  bool has_b = false, has_s = false;
  for (const auto& t : trials) (t.bonafide ? has_b : has_s) = true;
  if (has_b && has_s) {
    c.defined = true;
    c.eer = ComputeEer(trials).eer;
  }
  return c;
}

struct EvalReport {
  EerCell pooled;
  std::map<double, EerCell> by_snr;
  std::map<std::string, std::map<double, EerCell>> by_noise_snr;
  std::map<std::string, EerCell> by_noise;
};

/// Pooled EER is over the union of trials, never an average of cells.
inline EvalReport BreakdownReport(const std::vector<TrialScore>& trials) {
  EvalReport r;
  r.pooled = EerOf(trials);
  std::map<double, std::vector<TrialScore>> snr;
  std::map<std::string, std::map<double, std::vector<TrialScore>>> cell;
  std::map<std::string, std::vector<TrialScore>> noise;
  for (const auto& t : trials) {
    if (t.noise_id.empty() || std::isnan(t.snr_db)) continue;
    snr[t.snr_db].push_back(t);
    cell[t.noise_id][t.snr_db].push_back(t);
    noise[t.noise_id].push_back(t);
  }
  for (const auto& [k, v] : snr) r.by_snr[k] = EerOf(v);
  for (const auto& [n, m] : cell)
    for (const auto& [k, v] : m) r.by_noise_snr[n][k] = EerOf(v);
  for (const auto& [n, v] : noise) r.by_noise[n] = EerOf(v);
  return r;
}

inline std::string FormatEer(const EerCell& c) {
  if (!c.defined) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << c.eer;
  return os.str();
}

inline std::string FormatSnr(double snr) {
  std::ostringstream os;
  os << snr;
  return os.str();
}

/// Long-format rows, then a noise x SNR matrix with the 5 standard columns
/// and a per-noise AVG column.
inline void WriteReport(std::ostream& os, const EvalReport& r, const std::string& title) {
  os << "# " << title << "\ncondition\ttrials\teer\n";
  os << "pooled\t" << r.pooled.trials << '\t' << FormatEer(r.pooled) << '\n';
  for (const auto& [snr, c] : r.by_snr) os << "snr=" << FormatSnr(snr) << '\t' << c.trials << '\t' << FormatEer(c) << '\n';
  for (const auto& [n, m] : r.by_noise_snr)
    for (const auto& [snr, c] : m)
      os << "noise=" << n << ",snr=" << FormatSnr(snr) << '\t' << c.trials << '\t' << FormatEer(c) << '\n';
  if (r.by_noise_snr.empty()) return;
  std::set<double> cols{0, 5, 10, 15, 20};
  for (const auto& [snr, c] : r.by_snr) cols.insert(snr);
  os << "\nnoise";
  for (double c : cols) os << '\t' << FormatSnr(c) << "dB";
  os << "\tAVG.\n";
  for (const auto& [n, m] : r.by_noise_snr) {
    os << n;
    for (double c : cols) {
      auto it = m.find(c);
      os << '\t' << (it == m.end() ? std::string("-") : FormatEer(it->second));
    }
    os << '\t' << FormatEer(r.by_noise.at(n)) << '\n';
  }
  os << "all";
  for (double c : cols) {
    auto it = r.by_snr.find(c);
    os << '\t' << (it == r.by_snr.end() ? std::string("-") : FormatEer(it->second));
  }
  os << '\t' << FormatEer(r.pooled) << '\n';
}

/// "utt_id<TAB>score<TAB>label" with label bonafide|spoof.
inline void WriteScores(std::ostream& os, const std::vector<TrialScore>& trials) {
  os << std::setprecision(17);
  for (const auto& t : trials) os << t.utt_id << '\t' << t.score << '\t' << (t.bonafide ? "bonafide" : "spoof") << '\n';
}

inline std::vector<TrialScore> ReadScores(std::istream& is) {
  std::vector<TrialScore> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TrialScore t;
    std::string label;
    if (!(std::getline(ls, t.utt_id, '\t') && ls >> t.score && ls >> label) || (label != "bonafide" && label != "spoof"))
      throw std::invalid_argument("score file line " + std::to_string(lineno) + ": malformed");
    t.bonafide = label == "bonafide";
    out.push_back(t);
  }
  return out;
}

}  // namespace dkd
