/*
 * Copyright 2026 The oodkit Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oodkit/datastore.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/projection.hpp"
#include "oodkit/scoring.hpp"
#include "oodkit/selection.hpp"
#include "oodkit/serialize.hpp"
#include "oodkit/theorylab.hpp"

namespace oodkit::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Option plumbing. Every command resolves its parameters into one flat JSON
// object: built-in defaults, then the config file section, then flags given
// on the command line. The resolved object is echoed into run records, and
// feeding it back through --config reproduces the run.

enum class Kind { kString, kDouble, kCount, kSeed, kFlag };

struct OptionSpec {
  std::string flag;  // without leading dashes
  std::string key;
  Kind kind;
  std::string help;
};

struct Command {
  std::string name;
  json defaults;
  std::vector<OptionSpec> options;
};

std::string KeyOf(const std::string& flag) {
  std::string key = flag;
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

OptionSpec Opt(const std::string& flag, Kind kind, const std::string& help) {
  return {flag, KeyOf(flag), kind, help};
}

json ConvertFlag(const OptionSpec& spec, const std::string& text) {
  const auto bad = [&](const char* what) {
    Fail(ErrorCode::kInvalidConfig,
         "--" + spec.flag + " expects " + what + ", got '" + text + "'");
  };
  switch (spec.kind) {
    case Kind::kString:
      return text;
    case Kind::kDouble: {
      const auto v = detail::ParseDouble(text);
      if (!v.has_value() || !std::isfinite(*v)) bad("a finite number");
      return *v;
    }
    case Kind::kCount:
    case Kind::kSeed: {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        bad("a nonnegative integer");
      }
      return v;
    }
    case Kind::kFlag:
      return true;
  }
  return nullptr;
}

json LoadConfigSection(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoFailure, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParseFailure, "config " + path + ": " + e.what());
  }
  if (!doc.is_object()) {
    Fail(ErrorCode::kInvalidConfig, "config " + path + " must be an object");
  }
  // Either sectioned {"score": {...}, "eval": {...}} or one flat section.
  if (doc.contains(command) && doc[command].is_object()) return doc[command];
  return doc;
}

// Accessors over the resolved config.
std::optional<std::string> OptString(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg[key].is_null()) return std::nullopt;
  if (!cfg[key].is_string()) {
    Fail(ErrorCode::kInvalidConfig, key + " must be a string");
  }
  return cfg[key].get<std::string>();
}

std::string RequireString(const json& cfg, const std::string& key) {
  auto v = OptString(cfg, key);
  if (!v.has_value()) {
    Fail(ErrorCode::kUsage, "missing required --" + key);
  }
  return *v;
}

double GetDouble(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || !cfg[key].is_number()) {
    Fail(ErrorCode::kInvalidConfig, key + " must be a number");
  }
  return cfg[key].get<double>();
}

std::optional<std::uint64_t> OptCount(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg[key].is_null()) return std::nullopt;
  if (!cfg[key].is_number_integer() || cfg[key].get<std::int64_t>() < 0) {
    if (!cfg[key].is_number_unsigned()) {
      Fail(ErrorCode::kInvalidConfig, key + " must be a nonnegative integer");
    }
  }
  return cfg[key].get<std::uint64_t>();
}

std::uint64_t GetCount(const json& cfg, const std::string& key) {
  auto v = OptCount(cfg, key);
  if (!v.has_value()) Fail(ErrorCode::kInvalidConfig, key + " is required");
  return *v;
}

bool GetBool(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg[key].is_null()) return false;
  if (!cfg[key].is_boolean()) Fail(ErrorCode::kInvalidConfig, key + " must be a boolean");
  return cfg[key].get<bool>();
}

// ---------------------------------------------------------------------------
// Records and journal.

std::string Timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string HexFingerprint(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json DatasetEntry(const std::string& role, const std::string& path,
                  const Matrix& m) {
  return {{"role", role},
          {"path", path},
          {"rows", m.rows()},
          {"cols", m.cols()},
          {"fingerprint", HexFingerprint(Fingerprint(m))}};
}

json MakeRecord(const std::string& command, const json& config,
                const std::string& payload_type, const json& payload,
                const json& datasets) {
  return {{"timestamp", Timestamp()},
          {"toolkit_version", kToolkitVersion},
          {"command", command},
          {"config", config},
          {"payload_type", payload_type},
          {"payload", payload},
          {"datasets", datasets}};
}

// Appends one line under an exclusive advisory lock.
void AppendJournal(const std::string& path, const json& record) {
  const std::string line = record.dump() + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) Fail(ErrorCode::kIoFailure, "cannot open journal " + path);
  struct Closer {
    int fd;
    ~Closer() {
      ::flock(fd, LOCK_UN);
      ::close(fd);
    }
  } closer{fd};
  if (::flock(fd, LOCK_EX) != 0) {
    Fail(ErrorCode::kIoFailure, "cannot lock journal " + path);
  }
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n <= 0) Fail(ErrorCode::kIoFailure, "write failed on journal " + path);
    written += static_cast<std::size_t>(n);
  }
}

std::vector<json> ReadJournal(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoFailure, "cannot open journal " + path);
  std::vector<json> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::Trim(line).empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::exception& e) {
      Fail(ErrorCode::kParseFailure,
           path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return records;
}

void WriteText(const std::string& path, const std::string& text) {
  detail::WriteFile(path, text);
}

FileFormat OutputFormat(const json& cfg, const std::string& path) {
  const auto fmt = OptString(cfg, "format");
  if (!fmt.has_value()) return detail::ResolveFormat(path, FileFormat::kAuto);
  if (*fmt == "csv") return FileFormat::kCsv;
  if (*fmt == "binary") return FileFormat::kBinary;
  Fail(ErrorCode::kInvalidConfig,
       "--format must be csv or binary for this command, got " + *fmt);
}

// ---------------------------------------------------------------------------
// Shared loaders.

ScorerConfig ScorerFrom(const json& cfg, std::size_t num_classes) {
  ScorerConfig sc;
  sc.method = ParseMethod(RequireString(cfg, "method"));
  sc.tau = GetDouble(cfg, "tau");
  sc.top_n = OptCount(cfg, "top_n");
  if (!sc.top_n.has_value() && (sc.method == ScoreMethod::kLogitGapTopN ||
                                sc.method == ScoreMethod::kLogitGapVariant)) {
    sc.top_n = FixedN(num_classes);
  }
  sc.gamma = GetDouble(cfg, "gamma");
  sc.gen_m = OptCount(cfg, "gen_m");
  sc.energy_t = GetDouble(cfg, "energy_t");
  sc.transform = ParseTransform(RequireString(cfg, "transform"));
  sc.normalization = ParseNormalization(RequireString(cfg, "normalization"));
  return sc;
}

struct LoadedLogits {
  Matrix logits;
  json datasets = json::array();
};

// Logits from --input, or from --features projected onto --prototypes.
LoadedLogits LoadLogitsFrom(const json& cfg, const std::string& input_key,
                            const std::string& role) {
  LoadedLogits out;
  if (auto input = OptString(cfg, input_key)) {
    out.logits = LoadMatrix(*input);
    out.datasets.push_back(DatasetEntry(role, *input, out.logits));
    return out;
  }
  const auto features_path = OptString(cfg, "features");
  const auto protos_path = OptString(cfg, "prototypes");
  if (!features_path || !protos_path) {
    Fail(ErrorCode::kUsage,
         "provide --" + input_key + " or both --features and --prototypes");
  }
  const Matrix features = LoadMatrix(*features_path);
  const Matrix protos = LoadMatrix(*protos_path);
  out.logits = CosineLogits(features, PrototypeSet(protos),
                            GetDouble(cfg, "scale"));
  out.datasets.push_back(DatasetEntry("features", *features_path, features));
  out.datasets.push_back(DatasetEntry("prototypes", *protos_path, protos));
  return out;
}

// Features plus labels, taken from --labels or a "label" column.
struct LabeledFeatures {
  Matrix features;
  LabelVector labels;
  json datasets = json::array();
};

LabeledFeatures LoadLabeledFeatures(const json& cfg) {
  LabeledFeatures out;
  const std::string path = RequireString(cfg, "features");
  DatasetBundle bundle = LoadBundle(path);
  bundle.kind = BundleKind::kFeatures;
  out.features = std::move(bundle.matrix);
  out.datasets.push_back(DatasetEntry("features", path, out.features));
  if (auto labels_path = OptString(cfg, "labels")) {
    out.labels = LoadLabels(*labels_path);
  } else if (bundle.labels.has_value()) {
    out.labels = std::move(*bundle.labels);
  } else {
    Fail(ErrorCode::kUsage,
         "labels missing: pass --labels or add a 'label' column to " + path);
  }
  if (out.labels.size() != out.features.rows()) {
    Fail(ErrorCode::kDimensionMismatch,
         std::to_string(out.labels.size()) + " labels for " +
             std::to_string(out.features.rows()) + " feature rows");
  }
  return out;
}

PairPolicy ParsePairPolicy(const std::string& s) {
  if (s == "inter_class") return PairPolicy::kInterClass;
  if (s == "any") return PairPolicy::kAny;
  Fail(ErrorCode::kInvalidConfig, "pair policy must be inter_class or any");
}

SynthesisConfig SynthesisFrom(const json& cfg, std::size_t num_classes) {
  SynthesisConfig sc = DefaultSynthesisConfig(num_classes);
  sc.alpha = GetDouble(cfg, "alpha");
  if (cfg.contains("beta") && !cfg["beta"].is_null()) {
    sc.beta = GetDouble(cfg, "beta");
  }
  sc.val_size = GetCount(cfg, "val_size");
  sc.count = OptCount(cfg, "count");
  sc.seed = GetCount(cfg, "seed");
  sc.pair_policy = ParsePairPolicy(RequireString(cfg, "pair_policy"));
  return sc;
}

std::string Markdown(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  os << "|";
  for (const auto& h : header) os << " " << h << " |";
  os << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : rows) {
    os << "|";
    for (const auto& cell : row) os << " " << cell << " |";
    os << "\n";
  }
  return os.str();
}

std::string Csv(const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) {
    os << (i ? "," : "") << header[i];
  }
  os << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

std::string Num(double v) { return detail::FormatDouble(v); }

// ---------------------------------------------------------------------------
// Commands. Each takes the resolved config and returns an exit code.

int CmdScore(const json& cfg, std::ostream& out) {
  LoadedLogits loaded = LoadLogitsFrom(cfg, "input", "logits");
  const ScorerConfig sc = ScorerFrom(cfg, loaded.logits.cols());
  const ScoreVector scores = ScoreBatch(loaded.logits, sc);
  if (auto path = OptString(cfg, "out")) {
    SaveScoreColumn(scores.scores, *path, OutputFormat(cfg, *path));
  }
  const auto [lo, hi] =
      std::minmax_element(scores.scores.begin(), scores.scores.end());
  double sum = 0.0;
  for (double s : scores.scores) sum += s;
  json summary = {{"n", scores.size()},
                  {"min", *lo},
                  {"mean", sum / static_cast<double>(scores.size())},
                  {"max", *hi},
                  {"scorer", ToJson(sc)},
                  {"datasets", loaded.datasets}};
  out << summary.dump() << "\n";
  return kExitOk;
}

int CmdEval(const json& cfg, std::ostream& out) {
  const std::string id_path = RequireString(cfg, "input");
  const std::string ood_path = RequireString(cfg, "ood");
  const auto id_scores = LoadScoreColumn(id_path);
  const auto ood_scores = LoadScoreColumn(ood_path);
  const EvalResult result = Evaluate(id_scores, ood_scores, GetDouble(cfg, "tpr"));

  json datasets = json::array();
  datasets.push_back(DatasetEntry(
      "id_scores", id_path,
      Matrix(id_scores.size(), 1, std::vector<double>(id_scores))));
  datasets.push_back(DatasetEntry(
      "ood_scores", ood_path,
      Matrix(ood_scores.size(), 1, std::vector<double>(ood_scores))));
  const json record =
      MakeRecord("eval", cfg, "EvalResult", ToJson(result), datasets);
  if (auto journal = OptString(cfg, "journal")) AppendJournal(*journal, record);

  const std::vector<std::string> header = {"method", "dataset", "FPR95",
                                           "AUROC", "AUPR"};
  const std::vector<std::vector<std::string>> rows = {
      {OptString(cfg, "method").value_or(""), OptString(cfg, "name").value_or(""),
       Num(result.fpr95), Num(result.auroc), Num(result.aupr)}};
  if (auto table = OptString(cfg, "out")) WriteText(*table, Csv(header, rows));

  const std::string format = OptString(cfg, "format").value_or("jsonl");
  if (format == "markdown") {
    out << Markdown(header, rows);
  } else if (format == "csv") {
    out << Csv(header, rows);
  } else if (format == "jsonl") {
    out << record.dump() << "\n";
  } else {
    Fail(ErrorCode::kInvalidConfig, "eval --format must be jsonl, csv or markdown");
  }
  return kExitOk;
}

int CmdSelectN(const json& cfg, std::ostream& out) {
  json datasets = json::array();
  NSelection sel;
  std::string mode;
  if (GetBool(cfg, "fixed")) {
    std::size_t k = 0;
    if (auto protos = OptString(cfg, "prototypes")) {
      const Matrix m = LoadMatrix(*protos);
      datasets.push_back(DatasetEntry("prototypes", *protos, m));
      k = m.rows();
    } else if (auto kk = OptCount(cfg, "k")) {
      k = *kk;
    } else {
      Fail(ErrorCode::kUsage, "--fixed needs --prototypes or --k");
    }
    sel.n_star = FixedN(k);
    sel.n_min = sel.n_star;
    sel.n_max = sel.n_star;
    mode = "fixed";
  } else {
    LabeledFeatures lf = LoadLabeledFeatures(cfg);
    datasets = lf.datasets;
    const std::string protos_path = RequireString(cfg, "prototypes");
    const Matrix protos = LoadMatrix(protos_path);
    datasets.push_back(DatasetEntry("prototypes", protos_path, protos));
    const SynthesisConfig sc = SynthesisFrom(cfg, protos.rows());
    NRange range{OptCount(cfg, "n_min"), OptCount(cfg, "n_max")};
    sel = SelectNPipeline(lf.features, lf.labels, PrototypeSet(protos),
                          GetDouble(cfg, "scale"), sc, range);
    mode = "adaptive";
  }
  json payload = ToJson(sel);
  payload["mode"] = mode;
  if (auto path = OptString(cfg, "out")) WriteText(*path, payload.dump(2) + "\n");
  const json record = MakeRecord("select-n", cfg, "NSelection", payload, datasets);
  if (auto journal = OptString(cfg, "journal")) AppendJournal(*journal, record);
  out << record.dump() << "\n";
  return kExitOk;
}

int CmdSynthOod(const json& cfg, std::ostream& out) {
  LabeledFeatures lf = LoadLabeledFeatures(cfg);
  std::size_t num_classes = 0;
  for (std::size_t y : lf.labels) num_classes = std::max(num_classes, y + 1);
  SynthesisConfig sc = SynthesisFrom(cfg, num_classes);
  if (!sc.count.has_value()) sc.count = lf.features.rows();
  const Matrix synthetic = SynthesizeOod(lf.features, lf.labels, sc);
  const std::string path = RequireString(cfg, "out");
  SaveMatrix(synthetic, path, OutputFormat(cfg, path));
  json summary = {{"rows", synthetic.rows()},
                  {"cols", synthetic.cols()},
                  {"out", path},
                  {"fingerprint", HexFingerprint(Fingerprint(synthetic))}};
  out << summary.dump() << "\n";
  return kExitOk;
}

GaussianWorld WorldFrom(const json& cfg, std::size_t k, std::uint64_t seed) {
  GaussianWorld world = DefaultWorld(k, seed);
  if (cfg.contains("world") && cfg["world"].is_object()) {
    const json& w = cfg["world"];
    const auto matrix = [&](const char* key, Matrix& dst) {
      if (w.contains(key)) {
        dst = Matrix::FromRows(w[key].get<std::vector<std::vector<double>>>());
      }
    };
    if (w.contains("d")) world.d = w["d"].get<std::size_t>();
    matrix("means", world.means);
    matrix("class_variance", world.class_variance);
    matrix("weights", world.weights);
    if (w.contains("noise_variance")) {
      world.noise_variance = w["noise_variance"].get<std::vector<double>>();
    }
  }
  world.alpha = GetDouble(cfg, "alpha");
  world.beta = GetDouble(cfg, "beta");
  world.Validate();
  return world;
}

int CmdSimulate(const json& cfg, std::ostream& out) {
  const std::string theorem = RequireString(cfg, "theorem");
  const std::size_t k = GetCount(cfg, "k");
  const std::uint64_t seed = GetCount(cfg, "seed");
  const double tau = cfg.contains("tau") && !cfg["tau"].is_null()
                         ? GetDouble(cfg, "tau")
                         : 2.0 * (static_cast<double>(k) - 1.0) + 1.0;
  const auto samples = OptCount(cfg, "samples");
  TheoremReport report;
  if (theorem == "nonmax-order") {
    report = CheckNonmaxOrder(WorldFrom(cfg, k, seed), samples.value_or(100000));
  } else if (theorem == "appendixA-chain") {
    report = CheckThresholdChain(k, tau, samples.value_or(10000), seed);
  } else if (theorem == "fpr-direction") {
    report = CheckFprDirection(k, tau, samples.value_or(10000),
                               GetCount(cfg, "seeds"), seed);
  } else if (theorem == "logit-ordering") {
    report = CheckLogitOrdering(WorldFrom(cfg, k, seed), samples.value_or(100000),
                                OptCount(cfg, "top_n"));
  } else {
    Fail(ErrorCode::kUsage,
         "--theorem must be nonmax-order, appendixA-chain, fpr-direction or "
         "logit-ordering");
  }
  json echo = cfg;
  echo["tau"] = tau;
  const json record =
      MakeRecord("simulate", echo, "TheoremReport", ToJson(report), json::array());
  if (auto path = OptString(cfg, "out")) WriteText(*path, record.dump(2) + "\n");
  if (auto journal = OptString(cfg, "journal")) AppendJournal(*journal, record);
  out << record.dump() << "\n";
  return report.passed ? kExitOk : kExitTheoremFailed;
}

struct Summary {
  std::size_t count = 0;
  double sum = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  void Add(double v) {
    ++count;
    sum += v;
    min = std::min(min, v);
    max = std::max(max, v);
  }
};

int CmdReport(const json& cfg, std::ostream& out) {
  const std::string dir = OptString(cfg, "out").value_or(".");
  fs::create_directories(dir);
  json written = json::array();

  const auto id_input = OptString(cfg, "input");
  const auto ood_input = OptString(cfg, "ood");
  if (id_input.has_value() || ood_input.has_value()) {
    std::vector<std::pair<std::string, Matrix>> cohorts;
    if (id_input) cohorts.emplace_back("id", LoadMatrix(*id_input));
    if (ood_input) cohorts.emplace_back("ood", LoadMatrix(*ood_input));
    const std::size_t k = cohorts.front().second.cols();
    for (const auto& [name, m] : cohorts) {
      if (m.cols() != k) {
        Fail(ErrorCode::kDimensionMismatch, "ID and OOD logits differ in K");
      }
    }
    const ScorerConfig sc = ScorerFrom(cfg, k);

    // Per predicted class: score summary of each cohort.
    std::vector<std::vector<std::string>> class_rows;
    for (const auto& [name, m] : cohorts) {
      const ScoreVector scores = ScoreBatch(m, sc);
      std::vector<Summary> by_class(k);
      for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        const auto pred = static_cast<std::size_t>(
            std::max_element(row.begin(), row.end()) - row.begin());
        by_class[pred].Add(scores.scores[r]);
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (by_class[c].count == 0) continue;
        const Summary& s = by_class[c];
        class_rows.push_back({std::to_string(c), name, std::to_string(s.count),
                              Num(s.sum / static_cast<double>(s.count)),
                              Num(s.min), Num(s.max)});
      }
    }
    const std::string class_path = (fs::path(dir) / "per_class_scores.csv").string();
    WriteText(class_path, Csv({"predicted_class", "cohort", "count", "mean",
                               "min", "max"},
                              class_rows));
    written.push_back(class_path);

    std::vector<std::vector<std::string>> curve_rows;
    for (const auto& [name, m] : cohorts) {
      const LogitStatistics stats = ComputeLogitStatistics(m);
      for (std::size_t j = 0; j < stats.sorted_curve.size(); ++j) {
        curve_rows.push_back({std::to_string(j + 1), Num(stats.sorted_curve[j]), name});
      }
    }
    const std::string curve_path = (fs::path(dir) / "sorted_logits.csv").string();
    WriteText(curve_path, Csv({"rank", "mean_logit", "cohort"}, curve_rows));
    written.push_back(curve_path);
  }

  if (auto journal = OptString(cfg, "journal")) {
    std::vector<std::vector<std::string>> rows;
    for (const json& rec : ReadJournal(*journal)) {
      if (rec.value("payload_type", "") != "EvalResult") continue;
      const json& p = rec["payload"];
      const json& c = rec["config"];
      const auto text = [&](const char* key) {
        return c.contains(key) && c[key].is_string() ? c[key].get<std::string>()
                                                     : std::string();
      };
      rows.push_back({text("method"), text("name"), Num(p["fpr95"].get<double>()),
                      Num(p["auroc"].get<double>()), Num(p["aupr_in"].get<double>()),
                      std::to_string(p["n_id"].get<std::size_t>()),
                      std::to_string(p["n_ood"].get<std::size_t>())});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::tie(a[0], a[1]) < std::tie(b[0], b[1]);
    });
    const std::vector<std::string> header = {"method", "dataset", "fpr95",
                                             "auroc", "aupr_in", "n_id", "n_ood"};
    const std::string table_path = (fs::path(dir) / "benchmark.csv").string();
    WriteText(table_path, Csv(header, rows));
    written.push_back(table_path);
    if (OptString(cfg, "format").value_or("csv") == "markdown") {
      out << Markdown(header, rows);
    }
  }
  if (written.empty()) {
    Fail(ErrorCode::kUsage, "report needs --input/--ood logits or --journal");
  }
  out << json{{"written", written}}.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Command table.

std::vector<OptionSpec> ScorerOptions() {
  return {Opt("method", Kind::kString, "scoring function"),
          Opt("tau", Kind::kDouble, "softmax temperature"),
          Opt("top-n", Kind::kCount, "N for top-N scorers (default: fixed rule)"),
          Opt("gamma", Kind::kDouble, "GEN exponent"),
          Opt("gen-m", Kind::kCount, "GEN truncation M (default K)"),
          Opt("energy-t", Kind::kDouble, "energy temperature"),
          Opt("transform", Kind::kString, "variant transform: exp|square|sqrt"),
          Opt("normalization", Kind::kString, "over_n_minus_1|over_n")};
}

json ScorerDefaults() {
  return {{"method", "logitgap"}, {"tau", 1.0},
          {"top_n", nullptr},     {"gamma", 0.1},
          {"gen_m", nullptr},     {"energy_t", 1.0},
          {"transform", "exp"},   {"normalization", "over_n_minus_1"}};
}

std::vector<OptionSpec> SynthesisOptions() {
  return {Opt("alpha", Kind::kDouble, "interpolation coefficient"),
          Opt("beta", Kind::kDouble, "noise weight (default 0.8 if K >= 50, else 0)"),
          Opt("val-size", Kind::kCount, "validation subset size"),
          Opt("count", Kind::kCount, "synthetic rows (default: one per input row)"),
          Opt("seed", Kind::kSeed, "random seed"),
          Opt("pair-policy", Kind::kString, "inter_class|any")};
}

json SynthesisDefaults() {
  return {{"alpha", 0.3},      {"beta", nullptr}, {"val_size", 100},
          {"count", nullptr},  {"seed", 0},       {"pair_policy", "inter_class"}};
}

std::vector<Command> Commands() {
  std::vector<Command> cmds;
  {
    Command c{"score", ScorerDefaults(), ScorerOptions()};
    c.defaults.update(json{{"input", nullptr}, {"features", nullptr},
                           {"prototypes", nullptr}, {"scale", 1.0},
                           {"out", nullptr}, {"format", nullptr}});
    for (auto o : {Opt("input", Kind::kString, "logit matrix"),
                   Opt("features", Kind::kString, "feature matrix"),
                   Opt("prototypes", Kind::kString, "class prototypes"),
                   Opt("scale", Kind::kDouble, "cosine logit scale"),
                   Opt("out", Kind::kString, "score file"),
                   Opt("format", Kind::kString, "csv|binary")}) {
      c.options.push_back(o);
    }
    cmds.push_back(std::move(c));
  }
  {
    Command c{"eval",
              {{"input", nullptr}, {"ood", nullptr}, {"tpr", 0.95},
               {"journal", nullptr}, {"method", nullptr}, {"name", nullptr},
               {"out", nullptr}, {"format", "jsonl"}},
              {Opt("input", Kind::kString, "ID score file"),
               Opt("ood", Kind::kString, "OOD score file"),
               Opt("tpr", Kind::kDouble, "target true positive rate"),
               Opt("journal", Kind::kString, "results journal (JSON lines)"),
               Opt("method", Kind::kString, "method label for the table"),
               Opt("name", Kind::kString, "dataset label for the table"),
               Opt("out", Kind::kString, "CSV table"),
               Opt("format", Kind::kString, "jsonl|csv|markdown")}};
    cmds.push_back(std::move(c));
  }
  {
    Command c{"select-n", SynthesisDefaults(), SynthesisOptions()};
    c.defaults.update(json{{"features", nullptr}, {"labels", nullptr},
                           {"prototypes", nullptr}, {"scale", 1.0},
                           {"n_min", nullptr}, {"n_max", nullptr},
                           {"fixed", false}, {"k", nullptr},
                           {"out", nullptr}, {"journal", nullptr}});
    for (auto o : {Opt("features", Kind::kString, "ID feature matrix"),
                   Opt("labels", Kind::kString, "label file"),
                   Opt("prototypes", Kind::kString, "class prototypes"),
                   Opt("scale", Kind::kDouble, "cosine logit scale"),
                   Opt("n-min", Kind::kCount, "smallest N searched (default 2)"),
                   Opt("n-max", Kind::kCount, "largest N searched (default K)"),
                   Opt("fixed", Kind::kFlag, "use the fixed-fraction rule"),
                   Opt("k", Kind::kCount, "class count for --fixed"),
                   Opt("out", Kind::kString, "selection JSON"),
                   Opt("journal", Kind::kString, "results journal")}) {
      c.options.push_back(o);
    }
    cmds.push_back(std::move(c));
  }
  {
    Command c{"synth-ood", SynthesisDefaults(), SynthesisOptions()};
    c.defaults.update(json{{"features", nullptr}, {"labels", nullptr},
                           {"out", nullptr}, {"format", nullptr}});
    for (auto o : {Opt("features", Kind::kString, "ID feature matrix"),
                   Opt("labels", Kind::kString, "label file"),
                   Opt("out", Kind::kString, "synthetic feature matrix"),
                   Opt("format", Kind::kString, "csv|binary")}) {
      c.options.push_back(o);
    }
    cmds.push_back(std::move(c));
  }
  {
    Command c{"simulate",
              {{"theorem", "nonmax-order"}, {"k", 2}, {"samples", nullptr},
               {"seed", 0}, {"tau", nullptr}, {"alpha", 0.5}, {"beta", 0.1},
               {"seeds", 100}, {"top_n", nullptr}, {"out", nullptr},
               {"journal", nullptr}},
              {Opt("theorem", Kind::kString,
                   "nonmax-order|appendixA-chain|fpr-direction|logit-ordering"),
               Opt("k", Kind::kCount, "class count"),
               Opt("samples", Kind::kCount, "samples per cohort"),
               Opt("seed", Kind::kSeed, "random seed"),
               Opt("tau", Kind::kDouble, "softmax temperature (default 2(k-1)+1)"),
               Opt("alpha", Kind::kDouble, "OOD interpolation coefficient"),
               Opt("beta", Kind::kDouble, "OOD noise weight"),
               Opt("seeds", Kind::kCount, "seeds for fpr-direction"),
               Opt("top-n", Kind::kCount, "tail length for logit-ordering"),
               Opt("out", Kind::kString, "report JSON"),
               Opt("journal", Kind::kString, "results journal")}};
    cmds.push_back(std::move(c));
  }
  {
    Command c{"report", ScorerDefaults(), ScorerOptions()};
    c.defaults.update(json{{"input", nullptr}, {"ood", nullptr},
                           {"journal", nullptr}, {"out", "."},
                           {"format", "csv"}});
    for (auto o : {Opt("input", Kind::kString, "ID logit matrix"),
                   Opt("ood", Kind::kString, "OOD logit matrix"),
                   Opt("journal", Kind::kString, "results journal to tabulate"),
                   Opt("out", Kind::kString, "output directory"),
                   Opt("format", Kind::kString, "csv|markdown")}) {
      c.options.push_back(o);
    }
    cmds.push_back(std::move(c));
  }
  return cmds;
}

const char* Describe(const std::string& name) {
  if (name == "score") return "Score logits (or features + prototypes)";
  if (name == "eval") return "FPR95 / AUROC / AUPR of ID vs OOD score files";
  if (name == "select-n") return "Choose N for top-N LogitGap";
  if (name == "synth-ood") return "Synthesize outlier features by interpolation";
  if (name == "simulate") return "Run a Monte Carlo theorem check";
  if (name == "report") return "Emit plot-ready CSVs and benchmark tables";
  return "";
}

int Dispatch(const std::string& name, const json& cfg, std::ostream& out) {
  if (name == "score") return CmdScore(cfg, out);
  if (name == "eval") return CmdEval(cfg, out);
  if (name == "select-n") return CmdSelectN(cfg, out);
  if (name == "synth-ood") return CmdSynthOod(cfg, out);
  if (name == "simulate") return CmdSimulate(cfg, out);
  if (name == "report") return CmdReport(cfg, out);
  Fail(ErrorCode::kUsage, "unknown command " + name);
}

}  // namespace

std::string ValidateRunRecord(const json& record) {
  if (!record.is_object()) return "record is not an object";
  const std::pair<const char*, json::value_t> fields[] = {
      {"timestamp", json::value_t::string},
      {"toolkit_version", json::value_t::string},
      {"command", json::value_t::string},
      {"config", json::value_t::object},
      {"payload_type", json::value_t::string},
      {"payload", json::value_t::object},
      {"datasets", json::value_t::array}};
  for (const auto& [key, type] : fields) {
    if (!record.contains(key)) return std::string("missing ") + key;
    if (record[key].type() != type) return std::string("wrong type for ") + key;
  }
  for (const json& d : record["datasets"]) {
    for (const char* key : {"role", "path", "rows", "cols", "fingerprint"}) {
      if (!d.contains(key)) return std::string("dataset entry missing ") + key;
    }
  }
  const std::string type = record["payload_type"];
  const json& p = record["payload"];
  const auto require = [&](std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
      if (!p.contains(key)) return std::string("payload missing ") + key;
    }
    return std::string();
  };
  if (type == "EvalResult") {
    return require({"fpr95", "auroc", "aupr_in", "lambda95", "n_id", "n_ood"});
  }
  if (type == "NSelection") {
    return require({"n_star", "n_min", "n_max", "gap_curve"});
  }
  if (type == "TheoremReport") {
    return require({"name", "samples", "statistics", "passed", "margin"});
  }
  return "unknown payload_type " + type;
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"oodkit: post-hoc OOD scoring, N selection, metrics and "
               "theorem simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolkitVersion);

  const std::vector<Command> commands = Commands();
  // Raw flag text per command and option; std::map keeps addresses stable.
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::map<std::string, bool>> flags;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, CLI::App*> subs;
  for (const Command& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, Describe(cmd.name));
    subs[cmd.name] = sub;
    sub->add_option("--config", config_paths[cmd.name], "JSON config file");
    for (const OptionSpec& o : cmd.options) {
      if (o.kind == Kind::kFlag) {
        sub->add_flag("--" + o.flag, flags[cmd.name][o.key], o.help);
      } else {
        sub->add_option("--" + o.flag, raw[cmd.name][o.key], o.help);
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const Command& cmd : commands) {
      CLI::App* sub = subs[cmd.name];
      if (!sub->parsed()) continue;
      json cfg = cmd.defaults;
      if (!config_paths[cmd.name].empty()) {
        const json section =
            LoadConfigSection(config_paths[cmd.name], cmd.name);
        for (const auto& [key, value] : section.items()) cfg[key] = value;
      }
      for (const OptionSpec& o : cmd.options) {
        if (sub->count("--" + o.flag) == 0) continue;
        cfg[o.key] = o.kind == Kind::kFlag
                         ? json(true)
                         : ConvertFlag(o, raw[cmd.name][o.key]);
      }
      return Dispatch(cmd.name, cfg, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const json::exception& e) {
    err << "error: InvalidConfig: " << e.what() << "\n";
    return Error(ErrorCode::kInvalidConfig, "").exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace oodkit::cli
