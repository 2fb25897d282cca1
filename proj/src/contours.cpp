#include "ppl/contours.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"

namespace ppl {

Eigen::VectorXd interpolate_unvoiced(const Eigen::VectorXd& track,
                                     const std::vector<std::uint8_t>& voicing) {
  const int n = static_cast<int>(track.size());
  Eigen::VectorXd out = track;
  int first = -1, last = -1;
  for (int i = 0; i < n; ++i) {
    if (voicing[i]) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) return out;  // nothing voiced, leave as-is
  for (int i = 0; i < first; ++i) out[i] = track[first];
  for (int i = last + 1; i < n; ++i) out[i] = track[last];
  int i = first;
  while (i <= last) {
    if (voicing[i]) {
      ++i;
      continue;
    }
    // gap [i, j), bounded by voiced frames on both sides
    int j = i;
    while (!voicing[j]) ++j;
    const double a = track[i - 1];
    const double b = track[j];
    const int span = j - (i - 1);
    for (int k = i; k < j; ++k) {
      out[k] = a + (b - a) * static_cast<double>(k - (i - 1)) / span;
    }
    i = j;
  }
  return out;
}

Eigen::VectorXd median_smooth5(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd out(n);
  double window[5];
  for (int t = 0; t < n; ++t) {
    int m = 0;
    for (int k = -2; k <= 2; ++k) {
      const int i = std::clamp(t + k, 0, n - 1);
      window[m++] = x[i];
    }
    std::nth_element(window, window + 2, window + 5);
    out[t] = window[2];
  }
  return out;
}

Eigen::VectorXd delta_pm2(const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd out(n);
  auto at = [&](int i) { return x[std::clamp(i, 0, n - 1)]; };
  for (int t = 0; t < n; ++t) {
    out[t] = (1.0 * (at(t + 1) - at(t - 1)) + 2.0 * (at(t + 2) - at(t - 2))) / 10.0;
  }
  return out;
}

ContourStack assemble_stack(const Eigen::VectorXd& log_f0,
                            const std::vector<std::uint8_t>& voicing,
                            const Eigen::VectorXd& intensity_db,
                            const Eigen::VectorXd& hnr_db,
                            const MatRM& band_log_energy) {
  const int n = static_cast<int>(log_f0.size());
  if (static_cast<int>(voicing.size()) != n || intensity_db.size() != n || hnr_db.size() != n ||
      band_log_energy.cols() != n || band_log_energy.rows() != 5) {
    throw ValidationError("assemble_stack: track lengths disagree");
  }
  ContourStack stack;
  stack.voicing = voicing;
  stack.frames.resize(ContourStack::kChannels, n);

  const Eigen::VectorXd f0_interp = interpolate_unvoiced(log_f0, voicing);
  const Eigen::VectorXd f0_smooth = median_smooth5(f0_interp);
  stack.frames.row(chan::kF0Raw) = f0_interp.transpose();
  stack.frames.row(chan::kF0Smooth) = f0_smooth.transpose();
  stack.frames.row(chan::kF0Delta) = delta_pm2(f0_smooth).transpose();
  stack.frames.row(chan::kF0DeltaDelta) = delta_pm2(delta_pm2(f0_smooth)).transpose();

  const Eigen::VectorXd int_smooth = median_smooth5(intensity_db);
  stack.frames.row(chan::kIntRaw) = intensity_db.transpose();
  stack.frames.row(chan::kIntSmooth) = int_smooth.transpose();
  stack.frames.row(chan::kIntDelta) = delta_pm2(int_smooth).transpose();
  stack.frames.row(chan::kIntDeltaDelta) = delta_pm2(delta_pm2(int_smooth)).transpose();

  stack.frames.row(chan::kHnr) = hnr_db.transpose();
  for (int b = 0; b < 5; ++b) stack.frames.row(chan::kBand0 + b) = band_log_energy.row(b);
  // spectral tilt: high band minus low band
  stack.frames.row(chan::kTilt) = band_log_energy.row(4) - band_log_energy.row(0);
  return stack;
}

SpectralStats compute_spectral_stats(const std::vector<const ContourStack*>& stacks) {
  SpectralStats stats;
  for (int c = 0; c < 7; ++c) {
    double sum = 0.0, sumsq = 0.0;
    long n = 0;
    for (const ContourStack* s : stacks) {
      const auto row = s->frames.row(chan::kSpecBegin + c);
      sum += row.sum();
      sumsq += row.squaredNorm();
      n += s->num_frames();
    }
    const double mean = n > 0 ? sum / n : 0.0;
    const double var = n > 0 ? std::max(0.0, sumsq / n - mean * mean) : 0.0;
    stats.mean[c] = mean;
    stats.sd[c] = std::sqrt(var);
  }
  return stats;
}

namespace {

// z-score one row over column range [begin, end); zero variance -> zeros.
void zscore_row(MatRM& frames, int row, int begin, int end) {
  const int n = end - begin;
  if (n <= 0) return;
  const auto seg = frames.row(row).segment(begin, n);
  const double mean = seg.mean();
  const double var = std::max(0.0, seg.squaredNorm() / n - mean * mean);
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    frames.row(row).setZero();
    return;
  }
  frames.row(row) = (frames.row(row).array() - mean) / sd;
}

}  // namespace

ContourStack zscore_utterance(const ContourStack& stack, const SpectralStats* spectral) {
  ContourStack out = stack;
  const int n = out.num_frames();
  if (n == 0) return out;

  // F0 statistics over the voiced+interpolated span only
  int first = -1, last = -1;
  for (int i = 0; i < n; ++i) {
    if (out.voicing[i]) {
      if (first < 0) first = i;
      last = i;
    }
  }
  const int f0_begin = first < 0 ? 0 : first;
  const int f0_end = first < 0 ? n : last + 1;
  for (int c = chan::kF0Begin; c < chan::kF0End; ++c) zscore_row(out.frames, c, f0_begin, f0_end);
  for (int c = chan::kIntBegin; c < chan::kIntEnd; ++c) zscore_row(out.frames, c, 0, n);

  for (int c = 0; c < 7; ++c) {
    const int row = chan::kSpecBegin + c;
    double mean, sd;
    if (spectral != nullptr) {
      mean = spectral->mean[c];
      sd = spectral->sd[c];
    } else {
      mean = out.frames.row(row).mean();
      sd = std::sqrt(std::max(0.0, out.frames.row(row).squaredNorm() / n - mean * mean));
    }
    if (sd < 1e-12) {
      out.frames.row(row).setZero();
    } else {
      out.frames.row(row) = (out.frames.row(row).array() - mean) / sd;
    }
  }
  return out;
}

void write_contours_csv(const ContourStack& stack, const std::string& path) {
  std::ostringstream out;
  out << "t_s,f0_1,f0_2,f0_3,f0_4,int_1,int_2,int_3,int_4,"
         "spec_1,spec_2,spec_3,spec_4,spec_5,spec_6,spec_7,voiced\n";
  char buf[64];
  const int n = stack.num_frames();
  for (int t = 0; t < n; ++t) {
    std::snprintf(buf, sizeof(buf), "%.9g", t * ContourStack::kHopS);
    out << buf;
    for (int c = 0; c < ContourStack::kChannels; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", stack.frames(c, t));
      out << ',' << buf;
    }
    out << ',' << (stack.voicing[t] ? 1 : 0) << '\n';
  }
  write_file_atomic(path, out.str());
}

ContourStack read_contours_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open contour file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty contour file: " + path);

  std::vector<std::array<double, ContourStack::kChannels>> rows;
  std::vector<std::uint8_t> voicing;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<double, ContourStack::kChannels> vals;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) break;  // t_s, recomputed from index
    for (int c = 0; c < ContourStack::kChannels; ++c) {
      if (!std::getline(ss, cell, ','))
        throw ValidationError(path + ":" + std::to_string(line_no) + ": short row");
      vals[c] = std::strtod(cell.c_str(), nullptr);
    }
    if (!std::getline(ss, cell, ','))
      throw ValidationError(path + ":" + std::to_string(line_no) + ": missing voiced column");
    rows.push_back(vals);
    voicing.push_back(cell[0] == '1' ? 1 : 0);
  }

  ContourStack stack;
  stack.voicing = std::move(voicing);
  stack.frames.resize(ContourStack::kChannels, static_cast<int>(rows.size()));
  for (int t = 0; t < static_cast<int>(rows.size()); ++t) {
    for (int c = 0; c < ContourStack::kChannels; ++c) stack.frames(c, t) = rows[t][c];
  }
  return stack;
}

}  // namespace ppl
