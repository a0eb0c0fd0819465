#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "d4d/qa.hpp"
#include "d4d/scene.hpp"

namespace d4d {

inline constexpr double kSpeedTolerance = 0.05;     // m/s
inline constexpr double kDirectionTolerance = 0.5;  // rad, wrapped
inline constexpr double kDistanceTolerance = 0.1;   // m
inline constexpr double kPositionTolerance = 0.1;   // m, L2
inline constexpr double kIouThreshold = 0.1;        // strictly above
// Absorbs representation error so values written as exactly the threshold
// (0.55 - 0.5 is not 0.05 in binary) land on the inclusive side.
inline constexpr double kThresholdSlack = 1e-9;

// Absolute angular difference wrapped to [0, pi].
double angle_error(double a, double b);

// Thresholded comparison of two scalars for speed, direction or distance.
bool score_numeric(double pred, double gt, Measure kind);
bool score_position(const std::array<double, 3>& pred, const std::array<double, 3>& gt);

// Oriented 3D IoU (yaw about +z); throws Errc::kDegenerate on empty boxes.
double iou3d(const BBox3D& a, const BBox3D& b);

double f1_set(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt);
bool score_ordered(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt);

// Lowercased words with each punctuation character as its own token.
std::vector<std::string> bleu_tokenize(std::string_view text);

// Corpus BLEU-4 accumulator; a single `add` gives sentence BLEU.
class Bleu {
 public:
  void add(std::string_view candidate, const std::vector<std::string>& references);
  double score() const;

 private:
  std::array<std::size_t, 4> matched_{};
  std::array<std::size_t, 4> total_{};
  std::size_t candidate_length_ = 0;
  std::size_t reference_length_ = 0;
};

double bleu4(std::string_view candidate, const std::vector<std::string>& references);

// ---- predictions ----------------------------------------------------------------------

struct Prediction {
  std::string id;
  std::optional<Answer> answer;
  std::optional<std::string> raw_text;
};

// Throws Errc::kDuplicate on repeated ids.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);

// Lossy fallback for free-text model output: pulls numbers or ids out of the
// text according to the expected answer type.
std::optional<Answer> parse_raw_answer(std::string_view text, const Answer& expected);

enum class Metric { kAccuracy, kF1, kBleu4 };
std::string_view metric_name(Metric m);
Metric metric_for(TaskKind task);

// Per-pair score: 0/1 for accuracy, F1 in [0,1]; text answers are scored at
// the corpus level and return 0 here. Throws Errc::kScoring on type or unit
// mismatches.
double score_answer(const Answer& pred, const Answer& gt);

struct TaskReport {
  TaskKind task = TaskKind::kObjectCaptioning;
  Metric metric = Metric::kAccuracy;
  std::size_t count = 0;
  std::size_t answered = 0;
  double value = 0.0;  // accuracy in percent, F1 or BLEU-4 in [0, 1]
};

struct EvalReport {
  std::vector<TaskReport> tasks;  // every task kind, in enumeration order
  std::size_t total = 0;
  std::size_t answered = 0;
  double overall_bleu4 = 0.0;
  const TaskReport& at(TaskKind task) const;
};

EvalReport evaluate(const std::vector<QAPair>& qa, const std::vector<Prediction>& preds);
EvalReport evaluate_run(const std::filesystem::path& qa_path,
                        const std::filesystem::path& pred_path);

nlohmann::json report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace d4d
