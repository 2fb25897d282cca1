#include "ppl/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"

namespace ppl {

std::pair<int, int> word_frame_range(const ContourStack& stack, const Word& w) {
  const double hop = ContourStack::kHopS;
  int begin = static_cast<int>(std::floor(w.start_s / hop + 1e-9));
  int end = static_cast<int>(std::floor(w.end_s / hop + 1e-9));
  begin = std::clamp(begin, 0, stack.num_frames());
  end = std::clamp(end, 0, stack.num_frames());
  if (end <= begin)
    throw ValidationError("word '" + w.text + "' spans zero frames (alignment inconsistency)");
  return {begin, end};
}

namespace {

struct Functionals {
  double mean = 0, max = 0, min = 0, range = 0, std = 0, slope = 0;
  double quad = 0, peak_pos = 0.5;
};

Functionals functionals_over(const ContourStack& stack, int channel, int begin, int end) {
  Functionals f;
  const int n = end - begin;
  const auto seg = stack.frames.row(channel).segment(begin, n);
  f.mean = seg.mean();
  f.max = seg.maxCoeff();
  f.min = seg.minCoeff();
  f.range = f.max - f.min;
  f.std = std::sqrt(std::max(0.0, seg.squaredNorm() / n - f.mean * f.mean));

  if (n >= 2) {
    // least squares on centered, equispaced time (seconds)
    const double hop = ContourStack::kHopS;
    double s_ty = 0.0, s_tt = 0.0, s_tty = 0.0, s_tttt = 0.0;
    const double t0 = 0.5 * (n - 1);
    for (int k = 0; k < n; ++k) {
      const double t = (k - t0) * hop;
      const double y = seg[k];
      s_ty += t * y;
      s_tt += t * t;
      s_tty += t * t * y;
      s_tttt += t * t * t * t;
    }
    f.slope = s_ty / s_tt;
    const double denom = n * s_tttt - s_tt * s_tt;
    const double s_y = f.mean * n;
    if (denom > 1e-18) f.quad = (n * s_tty - s_tt * s_y) / denom;
    int argmax = 0;
    for (int k = 1; k < n; ++k) {
      if (seg[k] > seg[argmax]) argmax = k;
    }
    f.peak_pos = static_cast<double>(argmax) / (n - 1);
  }
  return f;
}

double word_duration(const Word& w) { return w.end_s - w.start_s; }

double mean_phone_duration(const Utterance& utt) {
  double total = 0.0;
  long n = 0;
  for (const auto& w : utt.words) {
    for (const auto& p : w.phones) {
      total += p.end_s - p.start_s;
      ++n;
    }
  }
  return n > 0 ? total / n : 0.0;
}

double pause_before(const Utterance& utt, int i) {
  return i > 0 ? std::max(0.0, utt.words[i].start_s - utt.words[i - 1].end_s) : 0.0;
}

double pause_after(const Utterance& utt, int i) {
  return i + 1 < utt.num_words() ? std::max(0.0, utt.words[i + 1].start_s - utt.words[i].end_s)
                                 : 0.0;
}

void check_finite(const double* v, int n, const char* what, const Word& w) {
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(v[i]))
      throw NumericalError(std::string(what) + ": non-finite feature for word '" + w.text + "'");
  }
}

}  // namespace

std::array<double, kA34Dim> compute_a34(const ContourStack& stack, const Utterance& utt, int i) {
  const Word& w = utt.words[i];
  const auto [begin, end] = word_frame_range(stack, w);
  const bool has_prev = i - kDeltaContext >= 0;
  const bool has_next = i + kDeltaContext < utt.num_words();

  std::array<double, kA34Dim> out{};
  int k = 0;
  for (const int channel : {chan::kF0Raw, chan::kIntRaw}) {
    const Functionals cur = functionals_over(stack, channel, begin, end);
    Functionals prev, next;
    if (has_prev) {
      const auto [pb, pe] = word_frame_range(stack, utt.words[i - 1]);
      prev = functionals_over(stack, channel, pb, pe);
    }
    if (has_next) {
      const auto [nb, ne] = word_frame_range(stack, utt.words[i + 1]);
      next = functionals_over(stack, channel, nb, ne);
    }
    out[k++] = cur.mean;
    out[k++] = cur.max;
    out[k++] = cur.min;
    out[k++] = cur.range;
    out[k++] = cur.std;
    out[k++] = cur.slope;
    out[k++] = has_prev ? cur.mean - prev.mean : 0.0;
    out[k++] = has_next ? cur.mean - next.mean : 0.0;
    out[k++] = has_prev ? cur.max - prev.max : 0.0;
    out[k++] = has_next ? cur.max - next.max : 0.0;
  }

  const Functionals hnr = functionals_over(stack, chan::kHnr, begin, end);
  const Functionals tilt = functionals_over(stack, chan::kTilt, begin, end);
  out[k++] = hnr.mean;
  out[k++] = hnr.max;
  out[k++] = tilt.mean;
  out[k++] = tilt.max;
  if (has_prev) {
    const auto [pb, pe] = word_frame_range(stack, utt.words[i - 1]);
    out[k] = tilt.mean - functionals_over(stack, chan::kTilt, pb, pe).mean;
  }
  ++k;
  if (has_next) {
    const auto [nb, ne] = word_frame_range(stack, utt.words[i + 1]);
    out[k] = tilt.mean - functionals_over(stack, chan::kTilt, nb, ne).mean;
  }
  ++k;

  const double mpd = mean_phone_duration(utt);
  const double dur = word_duration(w);
  out[k++] = dur;
  out[k++] = mpd > 0.0 ? dur / mpd : 0.0;
  out[k++] = pause_before(utt, i);
  out[k++] = pause_after(utt, i);
  out[k++] = has_prev ? dur - word_duration(utt.words[i - 1]) : 0.0;
  out[k++] = has_next ? dur - word_duration(utt.words[i + 1]) : 0.0;
  double syl_total = 0.0;
  for (const auto& s : w.syllables) syl_total += s.end_s - s.start_s;
  out[k++] = w.syllables.empty() ? 0.0 : syl_total / w.syllables.size();
  double phone_total = 0.0;
  for (const auto& p : w.phones) phone_total += p.end_s - p.start_s;
  out[k++] = w.phones.empty() ? 0.0 : phone_total / w.phones.size();

  check_finite(out.data(), kA34Dim, "a34", w);
  return out;
}

std::array<double, kA10Dim> compute_a10(const ContourStack& stack, const Utterance& utt, int i) {
  const Word& w = utt.words[i];
  const auto [begin, end] = word_frame_range(stack, w);
  const Functionals f0 = functionals_over(stack, chan::kF0Raw, begin, end);
  const Functionals in = functionals_over(stack, chan::kIntRaw, begin, end);
  const Functionals hnr = functionals_over(stack, chan::kHnr, begin, end);
  const Functionals tilt = functionals_over(stack, chan::kTilt, begin, end);
  std::array<double, kA10Dim> out = {f0.slope, f0.quad, f0.peak_pos, f0.range, in.slope,
                                     in.quad,  in.peak_pos, in.range, hnr.slope, tilt.slope};
  check_finite(out.data(), kA10Dim, "a10", w);
  return out;
}

std::array<double, kDp12Dim> compute_dp12(const Utterance& utt, int i) {
  const Word& w = utt.words[i];
  double syl_total = 0.0, syl_max = 0.0;
  for (const auto& s : w.syllables) {
    const double d = s.end_s - s.start_s;
    syl_total += d;
    syl_max = std::max(syl_max, d);
  }
  double phone_total = 0.0;
  for (const auto& p : w.phones) phone_total += p.end_s - p.start_s;

  const double actual[6] = {word_duration(w),
                            w.syllables.empty() ? 0.0 : syl_total / w.syllables.size(),
                            syl_max,
                            pause_before(utt, i),
                            pause_after(utt, i),
                            w.phones.empty() ? 0.0 : phone_total / w.phones.size()};
  const double mpd = mean_phone_duration(utt);
  std::array<double, kDp12Dim> out{};
  for (int k = 0; k < 6; ++k) {
    out[k] = actual[k];
    out[6 + k] = mpd > 0.0 ? actual[k] / mpd : 0.0;
  }
  check_finite(out.data(), kDp12Dim, "dp12", w);
  return out;
}

FeatureBlock feature_block_from_string(const std::string& s) {
  if (s == "cnn") return FeatureBlock::Cnn;
  if (s == "a34") return FeatureBlock::A34;
  if (s == "a10") return FeatureBlock::A10;
  if (s == "dp12") return FeatureBlock::Dp12;
  if (s == "lex") return FeatureBlock::Lex;
  if (s == "info") return FeatureBlock::Info;
  throw ValidationError("unknown feature block: '" + s + "'");
}

const char* to_string(FeatureBlock block) {
  switch (block) {
    case FeatureBlock::Cnn: return "cnn";
    case FeatureBlock::A34: return "a34";
    case FeatureBlock::A10: return "a10";
    case FeatureBlock::Dp12: return "dp12";
    case FeatureBlock::Lex: return "lex";
    default: return "info";
  }
}

namespace {

const char* kA34Names[kA34Dim] = {
    "f0_mean",    "f0_max",    "f0_min",    "f0_range",    "f0_std",    "f0_slope",
    "f0_dmean_prev", "f0_dmean_next", "f0_dmax_prev", "f0_dmax_next",
    "int_mean",   "int_max",   "int_min",   "int_range",   "int_std",   "int_slope",
    "int_dmean_prev", "int_dmean_next", "int_dmax_prev", "int_dmax_next",
    "hnr_mean",   "hnr_max",   "tilt_mean", "tilt_max",    "tilt_dprev", "tilt_dnext",
    "word_dur",   "word_dur_norm", "pause_before", "pause_after",
    "dur_dprev",  "dur_dnext", "syl_dur_mean", "phone_dur_mean"};

const char* kA10Names[kA10Dim] = {"f0_slope_a10",  "f0_quad",  "f0_peakpos",  "f0_range_a10",
                                  "int_slope_a10", "int_quad", "int_peakpos", "int_range_a10",
                                  "hnr_slope",     "tilt_slope"};

const char* kDp12Names[kDp12Dim] = {"dur_word",      "dur_syl_mean",      "dur_syl_max",
                                    "dp_pause_before", "dp_pause_after",  "dur_phone_mean",
                                    "dur_word_n",    "dur_syl_mean_n",    "dur_syl_max_n",
                                    "dp_pause_before_n", "dp_pause_after_n", "dur_phone_mean_n"};

}  // namespace

std::vector<std::string> feature_names(const std::vector<FeatureBlock>& blocks,
                                       const GroupingScheme& scheme) {
  std::vector<std::string> names;
  for (const FeatureBlock block : blocks) {
    switch (block) {
      case FeatureBlock::Cnn:
        break;  // encoding columns are model outputs, not static features
      case FeatureBlock::A34:
        names.insert(names.end(), kA34Names, kA34Names + kA34Dim);
        break;
      case FeatureBlock::A10:
        names.insert(names.end(), kA10Names, kA10Names + kA10Dim);
        break;
      case FeatureBlock::Dp12:
        names.insert(names.end(), kDp12Names, kDp12Names + kDp12Dim);
        break;
      case FeatureBlock::Lex:
        for (int g = 0; g < scheme.group_count; ++g)
          names.push_back("pos_" + std::string(to_string(scheme.name)) + "_" + std::to_string(g));
        names.push_back("n_phones");
        names.push_back("n_syllables");
        break;
      case FeatureBlock::Info:
        for (const char* n : {"prom_mandatory", "prom_optional", "prom_forbidden",
                              "bound_mandatory", "bound_optional", "bound_forbidden"})
          names.push_back(n);
        break;
    }
  }
  return names;
}

Eigen::MatrixXd build_static_features(const ContourStack& stack, const Utterance& utt,
                                      const std::vector<FeatureBlock>& blocks,
                                      const GroupingScheme& scheme) {
  const int n = utt.num_words();
  std::vector<double> column;
  Eigen::MatrixXd out;
  int dim = 0;
  for (const FeatureBlock block : blocks) {
    switch (block) {
      case FeatureBlock::Cnn: break;
      case FeatureBlock::A34: dim += kA34Dim; break;
      case FeatureBlock::A10: dim += kA10Dim; break;
      case FeatureBlock::Dp12: dim += kDp12Dim; break;
      case FeatureBlock::Lex: dim += scheme.group_count + 2; break;
      case FeatureBlock::Info: dim += kInfoDim; break;
    }
  }
  out.resize(dim, n);
  for (int i = 0; i < n; ++i) {
    int row = 0;
    for (const FeatureBlock block : blocks) {
      switch (block) {
        case FeatureBlock::Cnn:
          break;
        case FeatureBlock::A34: {
          const auto v = compute_a34(stack, utt, i);
          for (double x : v) out(row++, i) = x;
          break;
        }
        case FeatureBlock::A10: {
          const auto v = compute_a10(stack, utt, i);
          for (double x : v) out(row++, i) = x;
          break;
        }
        case FeatureBlock::Dp12: {
          const auto v = compute_dp12(utt, i);
          for (double x : v) out(row++, i) = x;
          break;
        }
        case FeatureBlock::Lex: {
          const auto v = lex_features(utt.words[i], scheme);
          for (double x : v) out(row++, i) = x;
          break;
        }
        case FeatureBlock::Info: {
          const auto v = encode_info(utt.words[i].info);
          for (double x : v) out(row++, i) = x;
          break;
        }
      }
    }
  }
  return out;
}

void write_features_csv(const Eigen::MatrixXd& features, const std::vector<std::string>& names,
                        const Utterance& utt, const std::string& path) {
  std::ostringstream out;
  out << "word_index,text,votes";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (int i = 0; i < static_cast<int>(features.cols()); ++i) {
    out << i << ',' << utt.words[i].text << ',' << utt.words[i].votes;
    for (int r = 0; r < static_cast<int>(features.rows()); ++r) {
      std::snprintf(buf, sizeof(buf), "%.9g", features(r, i));
      out << ',' << buf;
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace ppl
