#include "d4d/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "d4d/binary_io.hpp"
#include "d4d/error.hpp"
#include "d4d/json_types.hpp"
#include "d4d/parallel.hpp"

namespace d4d {

using nlohmann::json;

double angle_error(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d;
}

bool score_numeric(double pred, double gt, Measure kind) {
  if (!std::isfinite(pred)) return false;
  switch (kind) {
    case Measure::kSpeed:
      return std::abs(pred - gt) <= kSpeedTolerance + kThresholdSlack;
    case Measure::kDirection:
      return angle_error(pred, gt) <= kDirectionTolerance + kThresholdSlack;
    case Measure::kDistance:
      return std::abs(pred - gt) <= kDistanceTolerance + kThresholdSlack;
    default:
      throw Error(Errc::kScoring,
                  fmt::format("measure '{}' is not a scalar measure", measure_name(kind)));
  }
}

bool score_position(const std::array<double, 3>& pred, const std::array<double, 3>& gt) {
  const double dx = pred[0] - gt[0], dy = pred[1] - gt[1], dz = pred[2] - gt[2];
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  return std::isfinite(d) && d <= kPositionTolerance + kThresholdSlack;
}

// ---- IoU ------------------------------------------------------------------------------------

namespace {

using Point2 = std::array<double, 2>;

std::vector<Point2> footprint(const BBox3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hx = b.half_extents.x(), hy = b.half_extents.y();
  std::vector<Point2> out;
  for (const auto& [u, v] : {std::pair{hx, hy}, {-hx, hy}, {-hx, -hy}, {hx, -hy}}) {
    out.push_back({b.center.x() + c * u - s * v, b.center.y() + s * u + c * v});
  }
  return out;  // counter-clockwise
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double polygon_area(const std::vector<Point2>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& a = p[i];
    const Point2& b = p[(i + 1) % p.size()];
    s += a[0] * b[1] - a[1] * b[0];
  }
  return std::abs(s) * 0.5;
}

// Sutherland-Hodgman against a convex counter-clockwise clip polygon.
std::vector<Point2> clip_polygon(std::vector<Point2> subject, const std::vector<Point2>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> input = std::move(subject);
    subject.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point2& p = input[i];
      const Point2& q = input[(i + 1) % input.size()];
      const double cp = cross(a, b, p);
      const double cq = cross(a, b, q);
      if (cp >= 0) subject.push_back(p);
      if ((cp >= 0) != (cq >= 0)) {
        const double t = cp / (cp - cq);
        subject.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
    }
  }
  return subject;
}

void check_box(const BBox3D& b) {
  if (!b.center.allFinite() || !b.half_extents.allFinite() || !std::isfinite(b.yaw) ||
      !(b.half_extents.array() > 0.0).all()) {
    throw Error(Errc::kDegenerate, "iou3d: box has zero volume or non-finite values");
  }
}

double overlap_1d(double ca, double ha, double cb, double hb) {
  return std::max(0.0, std::min(ca + ha, cb + hb) - std::max(ca - ha, cb - hb));
}

}  // namespace

double iou3d(const BBox3D& a, const BBox3D& b) {
  check_box(a);
  check_box(b);
  const double oz = overlap_1d(a.center.z(), a.half_extents.z(), b.center.z(), b.half_extents.z());
  double area = 0.0;
  if (a.yaw == b.yaw) {
    const double c = std::cos(a.yaw), s = std::sin(a.yaw);
    const double dx = b.center.x() - a.center.x();
    const double dy = b.center.y() - a.center.y();
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    area = overlap_1d(0.0, a.half_extents.x(), u, b.half_extents.x()) *
           overlap_1d(0.0, a.half_extents.y(), v, b.half_extents.y());
  } else {
    const auto poly = clip_polygon(footprint(a), footprint(b));
    area = poly.size() >= 3 ? polygon_area(poly) : 0.0;
  }
  const double inter = area * oz;
  const double va = 8.0 * a.half_extents.prod();
  const double vb = 8.0 * b.half_extents.prod();
  return inter / (va + vb - inter);
}

double f1_set(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt) {
  const std::set<std::uint32_t> p(pred.begin(), pred.end());
  const std::set<std::uint32_t> g(gt.begin(), gt.end());
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::size_t tp = 0;
  for (auto id : p) tp += g.count(id);
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(p.size());
  const double recall = static_cast<double>(tp) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

bool score_ordered(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt) {
  return pred == gt;
}

// ---- BLEU -----------------------------------------------------------------------------------

std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

constexpr double kBleuEpsilon = 1e-9;

}  // namespace

void Bleu::add(std::string_view candidate, const std::vector<std::string>& references) {
  const auto cand = bleu_tokenize(candidate);
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(bleu_tokenize(r));
  candidate_length_ += cand.size();
  if (!refs.empty()) {
    // Closest reference length, shorter on ties.
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto diff = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) {
        best = r.size();
      }
    }
    reference_length_ += best;
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto counts = count_ngrams(cand, n);
    NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    for (const auto& [g, c] : counts) {
      const auto it = max_ref.find(g);
      matched_[n - 1] += std::min(c, it == max_ref.end() ? std::size_t{0} : it->second);
      total_[n - 1] += c;
    }
  }
}

double Bleu::score() const {
  if (candidate_length_ == 0) return 0.0;
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total_[n] == 0) continue;  // candidate too short for this order
    const double matched = std::max(static_cast<double>(matched_[n]), kBleuEpsilon);
    log_sum += std::log(matched / static_cast<double>(total_[n]));
    ++orders;
  }
  const double precision = std::exp(log_sum / static_cast<double>(orders));
  const double c = static_cast<double>(candidate_length_);
  const double r = static_cast<double>(reference_length_);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return std::clamp(bp * precision, 0.0, 1.0);
}

double bleu4(std::string_view candidate, const std::vector<std::string>& references) {
  Bleu b;
  b.add(candidate, references);
  return b.score();
}

// ---- predictions ----------------------------------------------------------------------------

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<Prediction> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_json_line(line, path.string(), lineno);
    Prediction p;
    try {
      p.id = j.at("id").get<std::string>();
      if (j.contains("answer") && !j.at("answer").is_null()) p.answer = j.at("answer").get<Answer>();
      if (j.contains("raw_text") && !j.at("raw_text").is_null()) {
        p.raw_text = j.at("raw_text").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error(Errc::kFormat, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
    if (!seen.insert(p.id).second) {
      throw Error(Errc::kDuplicate,
                  fmt::format("{}:{}: duplicate prediction id '{}'", path.string(), lineno, p.id));
    }
    out.push_back(std::move(p));
  }
  return out;
}

void save_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : preds) {
    json j{{"id", p.id}};
    if (p.answer) j["answer"] = *p.answer;
    if (p.raw_text) j["raw_text"] = *p.raw_text;
    text += j.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::optional<Answer> parse_raw_answer(std::string_view text, const Answer& expected) {
  static const std::regex kNumber(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
  static const std::regex kInteger(R"(\d+)");
  const std::string s(text);
  std::vector<double> numbers;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator();
       ++it) {
    numbers.push_back(std::stod(it->str()));
  }
  std::vector<std::uint32_t> ints;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kInteger); it != std::sregex_iterator();
       ++it) {
    ints.push_back(static_cast<std::uint32_t>(std::stoul(it->str())));
  }
  const auto clean = [](std::string v) {
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto b = v.find_first_not_of(" \t\r\n\"'");
    const auto e = v.find_last_not_of(" \t\r\n\"'.");
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };

  Answer a;
  a.kind = expected.kind;
  a.measure = expected.measure;
  a.units = expected.units;
  switch (expected.kind) {
    case AnswerKind::kNumber:
      if (numbers.empty()) return std::nullopt;
      a.number = numbers[0];
      return a;
    case AnswerKind::kVector:
      if (numbers.size() < 3) return std::nullopt;
      a.vec = {numbers[0], numbers[1], numbers[2]};
      return a;
    case AnswerKind::kVelocity:
      if (numbers.size() < 2) return std::nullopt;
      a.speed = numbers[0];
      a.heading = numbers[1];
      return a;
    case AnswerKind::kBox:
      if (numbers.size() < 7) return std::nullopt;
      a.box.center = Vec3(numbers[0], numbers[1], numbers[2]);
      a.box.half_extents = Vec3(numbers[3], numbers[4], numbers[5]) * 0.5;
      a.box.yaw = numbers[6];
      return a;
    case AnswerKind::kId:
      if (ints.empty()) return std::nullopt;
      a.ids = {ints[0]};
      return a;
    case AnswerKind::kIdList:
      a.ids = ints;
      return a;
    case AnswerKind::kIdSet:
      a.ids = ints;
      std::sort(a.ids.begin(), a.ids.end());
      a.ids.erase(std::unique(a.ids.begin(), a.ids.end()), a.ids.end());
      return a;
    case AnswerKind::kLabel:
      a.text = clean(s);
      return a;
    case AnswerKind::kLabelList: {
      std::size_t start = 0;
      while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = clean(s.substr(start, comma == std::string::npos ? std::string::npos
                                                                              : comma - start));
        if (!piece.empty() && piece != "none") a.labels.push_back(piece);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return a;
    }
    case AnswerKind::kText:
      a.text = s;
      return a;
  }
  return std::nullopt;
}

// ---- scoring ---------------------------------------------------------------------------------

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kAccuracy:
      return "accuracy";
    case Metric::kF1:
      return "f1";
    case Metric::kBleu4:
      return "bleu4";
  }
  return "";
}

Metric metric_for(TaskKind task) {
  switch (task) {
    case TaskKind::kObjectCaptioning:
      return Metric::kBleu4;
    case TaskKind::kDynamicScene:
    case TaskKind::kTemporaryStaticObjects:
      return Metric::kF1;
    default:
      return Metric::kAccuracy;
  }
}

double score_answer(const Answer& pred, const Answer& gt) {
  if (pred.kind != gt.kind) {
    throw Error(Errc::kScoring, fmt::format("answer type '{}' where '{}' was expected",
                                            answer_kind_name(pred.kind), answer_kind_name(gt.kind)));
  }
  if (!pred.units.empty() && !gt.units.empty() && pred.units != gt.units) {
    throw Error(Errc::kScoring,
                fmt::format("answer in '{}' where '{}' was expected", pred.units, gt.units));
  }
  const auto as_score = [](bool ok) { return ok ? 1.0 : 0.0; };
  switch (gt.kind) {
    case AnswerKind::kNumber:
      return as_score(score_numeric(pred.number, gt.number, gt.measure));
    case AnswerKind::kVector:
      return as_score(score_position(pred.vec, gt.vec));
    case AnswerKind::kVelocity: {
      const bool speed_ok = score_numeric(pred.speed, gt.speed, Measure::kSpeed);
      const bool heading_ok = gt.speed <= kMotionThreshold ||
                              score_numeric(pred.heading, gt.heading, Measure::kDirection);
      return as_score(speed_ok && heading_ok);
    }
    case AnswerKind::kBox:
      // A malformed predicted box is wrong, not an evaluation failure.
      if (!(pred.box.half_extents.array() > 0.0).all() || !pred.box.center.allFinite() ||
          !pred.box.half_extents.allFinite() || !std::isfinite(pred.box.yaw)) {
        return 0.0;
      }
      return as_score(iou3d(pred.box, gt.box) > kIouThreshold + kThresholdSlack);
    case AnswerKind::kLabel:
      return as_score(pred.text == gt.text);
    case AnswerKind::kLabelList:
      return as_score(pred.labels == gt.labels);
    case AnswerKind::kId:
      return as_score(pred.ids == gt.ids);
    case AnswerKind::kIdList:
      return as_score(score_ordered(pred.ids, gt.ids));
    case AnswerKind::kIdSet:
      return f1_set(pred.ids, gt.ids);
    case AnswerKind::kText:
      return 0.0;
  }
  return 0.0;
}

const TaskReport& EvalReport::at(TaskKind task) const {
  for (const auto& t : tasks) {
    if (t.task == task) return t;
  }
  throw Error(Errc::kLookup, fmt::format("report has no task '{}'", task_name(task)));
}

EvalReport evaluate(const std::vector<QAPair>& qa, const std::vector<Prediction>& preds) {
  std::unordered_map<std::string, std::size_t> by_qa;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    if (!by_qa.emplace(qa[i].id, i).second) {
      throw Error(Errc::kDuplicate, fmt::format("duplicate QA id '{}'", qa[i].id));
    }
  }
  std::vector<const Prediction*> matched(qa.size(), nullptr);
  for (const auto& p : preds) {
    const auto it = by_qa.find(p.id);
    if (it == by_qa.end()) throw Error(Errc::kLookup, fmt::format("prediction for unknown id '{}'", p.id));
    if (matched[it->second]) throw Error(Errc::kDuplicate, fmt::format("duplicate prediction id '{}'", p.id));
    matched[it->second] = &p;
  }

  // Resolve and score every pair; aggregation below runs in file order.
  std::vector<std::optional<Answer>> resolved(qa.size());
  std::vector<double> scores(qa.size(), 0.0);
  parallel_for(qa.size(), [&](std::size_t i) {
    const Prediction* p = matched[i];
    if (!p) return;
    if (p->answer) {
      resolved[i] = p->answer;
    } else if (p->raw_text) {
      resolved[i] = parse_raw_answer(*p->raw_text, qa[i].answer);
    }
    if (resolved[i]) {
      try {
        scores[i] = score_answer(*resolved[i], qa[i].answer);
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", qa[i].id, e.what()));
      }
    }
  });

  EvalReport report;
  std::map<TaskKind, Bleu> task_bleu;
  std::map<TaskKind, double> sums;
  Bleu overall;
  for (TaskKind t : kAllTasks) report.tasks.push_back({t, metric_for(t), 0, 0, 0.0});
  for (std::size_t i = 0; i < qa.size(); ++i) {
    TaskReport& tr = report.tasks[static_cast<std::size_t>(qa[i].task)];
    ++tr.count;
    const std::string reference = answer_text(qa[i].answer);
    const std::string candidate = resolved[i] ? answer_text(*resolved[i]) : std::string();
    if (resolved[i]) ++tr.answered;
    overall.add(candidate, {reference});
    if (tr.metric == Metric::kBleu4) {
      task_bleu[tr.task].add(candidate, {reference});
    } else {
      sums[tr.task] += scores[i];
    }
  }
  for (auto& tr : report.tasks) {
    report.total += tr.count;
    report.answered += tr.answered;
    if (tr.count == 0) continue;
    const double n = static_cast<double>(tr.count);
    switch (tr.metric) {
      case Metric::kAccuracy:
        tr.value = 100.0 * sums[tr.task] / n;
        break;
      case Metric::kF1:
        tr.value = sums[tr.task] / n;
        break;
      case Metric::kBleu4:
        tr.value = task_bleu[tr.task].score();
        break;
    }
  }
  report.overall_bleu4 = overall.score();
  return report;
}

EvalReport evaluate_run(const std::filesystem::path& qa_path,
                        const std::filesystem::path& pred_path) {
  return evaluate(load_qa(qa_path), load_predictions(pred_path));
}

json report_json(const EvalReport& report) {
  json tasks = json::array();
  for (const auto& t : report.tasks) {
    tasks.push_back(json{{"task", task_name(t.task)},
                         {"metric", metric_name(t.metric)},
                         {"count", t.count},
                         {"answered", t.answered},
                         {"value", t.count ? json(t.value) : json()}});
  }
  return json{{"tasks", tasks},
              {"total", report.total},
              {"answered", report.answered},
              {"overall_bleu4", report.overall_bleu4}};
}

std::string report_csv(const EvalReport& report) {
  std::string out = "task,metric,count,answered,value\n";
  for (const auto& t : report.tasks) {
    out += fmt::format("{},{},{},{},{}\n", task_name(t.task), metric_name(t.metric), t.count,
                       t.answered, t.count ? fmt::format("{:.6f}", t.value) : std::string());
  }
  out += fmt::format("overall,bleu4,{},{},{:.6f}\n", report.total, report.answered,
                     report.overall_bleu4);
  return out;
}

}  // namespace d4d
