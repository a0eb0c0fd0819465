#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "d4d/scene.hpp"
#include "d4d/simulator.hpp"

namespace d4d {

enum class TaskKind {
  kObjectCaptioning,
  kDynamicScene,
  kRelativePosition,
  kCurrentObjectProperty,
  kAgentVelocity,
  kMultiAgentRelation,
  kTemporaryStaticObjects,
  kMostActiveObject,
  kMotionSequence,
  kAgentTrajectory,
  kAgentMotionStatus,
  kAgentGrabObject,
};

inline constexpr std::array<TaskKind, 12> kAllTasks{
    TaskKind::kObjectCaptioning,       TaskKind::kDynamicScene,
    TaskKind::kRelativePosition,       TaskKind::kCurrentObjectProperty,
    TaskKind::kAgentVelocity,          TaskKind::kMultiAgentRelation,
    TaskKind::kTemporaryStaticObjects, TaskKind::kMostActiveObject,
    TaskKind::kMotionSequence,         TaskKind::kAgentTrajectory,
    TaskKind::kAgentMotionStatus,      TaskKind::kAgentGrabObject};

std::string_view task_name(TaskKind task);
TaskKind parse_task(std::string_view name);  // throws Errc::kFormat

// ---- answers --------------------------------------------------------------------------

enum class AnswerKind { kNumber, kVector, kLabel, kLabelList, kId, kIdList, kIdSet, kText, kVelocity, kBox };

// How a numeric answer is thresholded; exact kinds ignore it.
enum class Measure { kNone, kSpeed, kDirection, kDistance, kPosition, kBox };

std::string_view answer_kind_name(AnswerKind kind);
std::string_view measure_name(Measure measure);

struct Answer {
  AnswerKind kind = AnswerKind::kText;
  Measure measure = Measure::kNone;
  std::string units;
  double number = 0.0;
  std::array<double, 3> vec{};
  std::string text;  // label or free text
  std::vector<std::string> labels;
  std::vector<std::uint32_t> ids;  // single id, ordered list, or sorted set
  double speed = 0.0;
  double heading = 0.0;
  BBox3D box;

  // The canonical value a chain of thought must end on.
  nlohmann::json payload() const;
  bool operator==(const Answer&) const = default;
};

Answer answer_from_payload(AnswerKind kind, Measure measure, std::string units,
                           const nlohmann::json& payload);

void to_json(nlohmann::json& j, const Answer& a);
void from_json(const nlohmann::json& j, Answer& a);

// Plain-text rendering used for BLEU over non-text answers.
std::string answer_text(const Answer& a);

// ---- chain of thought ---------------------------------------------------------------------

// One reasoning step. `args` holds literals or "$k" references to earlier
// steps; `value` is what `op` produced.
struct CotStep {
  std::string text;
  std::string op;
  nlohmann::json args = nlohmann::json::array();
  nlohmann::json value;
};

void to_json(nlohmann::json& j, const CotStep& s);
void from_json(const nlohmann::json& j, CotStep& s);

// Evaluates one operation on resolved arguments; throws Errc::kFormat on
// unknown ops or malformed operands.
nlohmann::json apply_cot_op(std::string_view op, const nlohmann::json& args);

// Re-executes every step and checks the final value against the answer.
// Returns an empty string on success, otherwise a description of the first failure.
std::string verify_cot(const std::vector<CotStep>& steps, const Answer& answer);

// ---- QA pairs ---------------------------------------------------------------------------------

struct Anchors {
  std::string sequence_id;
  std::vector<double> timestamps;
  std::vector<std::uint32_t> instance_ids;
  std::string detail;  // sub-question selector, e.g. the queried property
  bool operator==(const Anchors&) const = default;
};

struct QAPair {
  std::string id;
  TaskKind task = TaskKind::kObjectCaptioning;
  std::string question;
  Answer answer;
  std::vector<CotStep> cot;
  Anchors anchors;
};

void to_json(nlohmann::json& j, const QAPair& q);
void from_json(const nlohmann::json& j, QAPair& q);

std::vector<QAPair> load_qa(const std::filesystem::path& path);
void save_qa(const std::vector<QAPair>& qa, const std::filesystem::path& path);

// ---- generation --------------------------------------------------------------------------------

inline constexpr double kDeadBand = 0.2;        // m, relative-position dead-band
inline constexpr double kNearDistance = 1.5;    // m
inline constexpr double kTurnRate = 0.3;        // rad/s
inline constexpr double kDefaultDwell = 3.0;    // s
inline constexpr double kRangeRateThreshold = 0.05;  // m/s

struct EntityProperties {
  std::uint32_t id = 0;
  bool agent = false;
  std::string label;
  Properties props;
  bool in_view = false;
};

struct FrameProperties {
  std::size_t frame = 0;
  double t = 0.0;
  std::vector<EntityProperties> entities;      // objects then agents
  std::vector<std::vector<double>> distance;   // center-to-center, m
  std::vector<std::vector<double>> bearing;    // of column entity in row entity's facing frame
  std::size_t index_of(std::uint32_t id) const;  // throws Errc::kLookup
};

FrameProperties frame_level_properties(const GroundTruth& gt, double t);

struct WindowSpec {
  double start = 0.0;
  double end = 0.0;
  double stride = 0.0;
  void validate() const;
};

// Windows of `length` seconds every `stride` seconds that fit in the sequence;
// a single whole-sequence window when the sequence is shorter than `length`.
std::vector<WindowSpec> make_windows(double duration, double length, double stride);

struct QaOptions {
  double dwell = kDefaultDwell;
  double momentary_interval = 1.0;  // s between frames that get momentary questions
};

std::vector<QAPair> gen_momentary(const GroundTruth& gt, double t, std::uint64_t seed,
                                  const QaOptions& options = {});
std::vector<QAPair> gen_durative(const GroundTruth& gt, const WindowSpec& window,
                                 std::uint64_t seed, const QaOptions& options = {});
QAPair gen_caption(const GroundTruth& gt, double t, std::uint32_t id, std::uint64_t seed = 0);

// Deterministic caption text shared with tests.
std::string color_name(const Rgb& rgb);
std::string size_class(const Vec3& half_extents);

// Ego-view label of `b` relative to `a` from the ego camera yaw.
std::string relative_position_label(const Vec3& a, const Vec3& b, double ego_yaw);
std::string range_rate_label(double rate);
std::string motion_status(double speed, double yaw_rate);

struct DatasetSummary {
  std::map<TaskKind, std::size_t> counts;
  std::size_t total = 0;
  std::size_t frames = 0;
  std::size_t dynamic_frames = 0;  // frames with at least one moving object
  double dynamic_fraction = 0.0;
};

// Fraction of sampled frames where some object exceeds the motion threshold.
DatasetSummary dynamics_summary(const GroundTruth& gt);

using RewriteHook = std::function<std::string(const QAPair&)>;

// Momentary questions on sampled frames, durative per window, and captions at
// each window start; sorted by (task, anchor time, ids) and numbered.
std::vector<QAPair> generate_dataset(const GroundTruth& gt, const std::vector<WindowSpec>& windows,
                                     std::uint64_t seed, const QaOptions& options = {},
                                     const RewriteHook& rewrite = {});

DatasetSummary summarize(const GroundTruth& gt, const std::vector<QAPair>& qa);

// Writes the QA file and a ground-truth answers file shaped like predictions.
DatasetSummary emit_dataset(const GroundTruth& gt, const std::vector<WindowSpec>& windows,
                            std::uint64_t seed, const std::filesystem::path& qa_path,
                            const std::filesystem::path& answers_path,
                            const QaOptions& options = {}, const RewriteHook& rewrite = {});

}  // namespace d4d
