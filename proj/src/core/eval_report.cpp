// Copyright 2026 The UDSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eval_report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include "binary_io.hpp"
#include "dsp.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace udse::eval {
namespace fs = std::filesystem;
namespace {

std::string Fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string EntryId(const corpus::ManifestEntry& e) {
  return e.recipe + "/" + fs::path(e.degraded_path.empty() ? e.clean_path : e.degraded_path)
                              .stem()
                              .string();
}

std::string SafeName(std::string id) {
  std::replace(id.begin(), id.end(), '/', '_');
  std::replace(id.begin(), id.end(), '+', '_');
  return id;
}

}  // namespace

Aggregate Summarize(std::vector<double> values) {
  Aggregate a;
  if (values.empty()) return a;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(sq / n);
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  a.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return a;
}

void EvalReport::Recompute() {
  std::vector<double> si, deg, lsd;
  std::vector<std::vector<double>> acc(static_cast<std::size_t>(stages));
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    si.push_back(r.si_snr_db);
    deg.push_back(r.degraded_si_snr_db);
    lsd.push_back(r.lsd_db);
    for (std::size_t n = 0; n < acc.size() && n < r.token_accuracy.size(); ++n) {
      acc[n].push_back(r.token_accuracy[n]);
    }
  }
  si_snr_db = Summarize(si);
  degraded_si_snr_db = Summarize(deg);
  lsd_db = Summarize(lsd);
  token_accuracy.clear();
  for (auto& a : acc) token_accuracy.push_back(Summarize(a));
}

std::string EvalReport::Format() const {
  std::ostringstream out;
  out << "UDSE-EVAL v1\n";
  for (const auto& w : warnings) out << "# warning: " << w << '\n';
  out << "id\tstatus\tsi_snr_db\tdegraded_si_snr_db\tlsd_db\tstages_used";
  for (int n = 1; n <= stages; ++n) out << "\tacc" << n;
  out << '\n';
  for (const auto& r : records) {
    out << r.id << '\t' << r.status << '\t' << Fixed(r.si_snr_db) << '\t'
        << Fixed(r.degraded_si_snr_db) << '\t' << Fixed(r.lsd_db) << '\t' << r.stages_used;
    for (int n = 0; n < stages; ++n) {
      const double a = n < static_cast<int>(r.token_accuracy.size()) ? r.token_accuracy[n] : 0.0;
      out << '\t' << Fixed(a, 6);
    }
    out << '\n';
  }
  out << "\n# summary\nmetric\tmean\tmedian\tstd\n";
  auto row = [&](const std::string& name, const Aggregate& a, int digits) {
    out << name << '\t' << Fixed(a.mean, digits) << '\t' << Fixed(a.median, digits) << '\t'
        << Fixed(a.std, digits) << '\n';
  };
  row("si_snr_db", si_snr_db, 4);
  row("degraded_si_snr_db", degraded_si_snr_db, 4);
  row("lsd_db", lsd_db, 4);
  for (std::size_t n = 0; n < token_accuracy.size(); ++n) {
    row("acc" + std::to_string(n + 1), token_accuracy[n], 6);
  }
  return out.str();
}

void WriteSpectrogram(const Waveform& w, const SpectralConfig& cfg, const std::string& path) {
  const auto window = cfg.rectangular ? dsp::RectangularWindow(cfg.frame_length)
                                      : dsp::HannWindow(cfg.frame_length);
  const auto frames = dsp::Stft(w.samples, cfg.frame_length, cfg.hop, window);
  ByteWriter out;
  out.U64(static_cast<std::uint64_t>(frames.bins.rows()));
  out.U64(static_cast<std::uint64_t>(frames.bins.cols()));
  for (Eigen::Index j = 0; j < frames.bins.cols(); ++j) {
    for (Eigen::Index i = 0; i < frames.bins.rows(); ++i) {
      out.F32(static_cast<float>(std::abs(frames.bins(i, j))));
    }
  }
  WriteFileAtomic(path, out.data());
}

EvalReport EvaluateCorpus(const corpus::Manifest& manifest, const model::UdseModel& model,
                          const rvq::Codec& codec, const EvalOptions& options) {
  model.CheckCodec(codec);
  EvalReport report;
  report.stages = codec.stages();
  if (!options.spectrogram_dir.empty()) fs::create_directories(options.spectrogram_dir);

  const auto& entries = manifest.entries;
  report.records.resize(entries.size());
  auto work = [&](std::size_t i) {
    const auto& e = entries[i];
    UtteranceRecord& r = report.records[i];
    r.id = EntryId(e);
    r.stages_used = codec.stages();
    if (!e.ok()) {
      r.status = "skipped: generation " + e.status;
      return;
    }
    try {
      const Waveform clean = ReadWav(e.clean_path);
      const Waveform degraded = ReadWav(e.degraded_path);
      const auto gt = codec.Quantize(codec.Encode(clean)).grid;
      const auto enhanced = model::Enhance(model, codec, degraded, DeriveSeed(options.seed, i),
                                           options.oracle_tokens ? &gt : nullptr);
      r.si_snr_db = SiSnr(enhanced.audio, clean);
      r.degraded_si_snr_db = SiSnr(degraded, clean);
      r.lsd_db = LogSpectralDistance(enhanced.audio, clean, options.lsd);
      r.token_accuracy = TokenAccuracy(enhanced.tokens, gt);
      if (!options.spectrogram_dir.empty()) {
        const std::string base = (fs::path(options.spectrogram_dir) / SafeName(r.id)).string();
        WriteSpectrogram(clean, options.lsd, base + ".clean.f32");
        WriteSpectrogram(degraded, options.lsd, base + ".degraded.f32");
        WriteSpectrogram(enhanced.audio, options.lsd, base + ".enhanced.f32");
      }
    } catch (const std::exception& ex) {
      std::string reason = ex.what();
      std::replace(reason.begin(), reason.end(), '\t', ' ');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      r.status = "failed: " + reason;
      r.token_accuracy.clear();
    }
  };

  const int threads = std::max(1, options.threads);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) work(i);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const UtteranceRecord& a, const UtteranceRecord& b) { return a.id < b.id; });
  if (entries.empty()) report.warnings.push_back("test split is empty");
  report.Recompute();
  return report;
}

}  // namespace udse::eval
