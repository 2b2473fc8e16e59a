#include "tailfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tailfuse/errors.hpp"
#include "text_io.hpp"

namespace tailfuse {

using nlohmann::json;

void PredictionTable::validate() const {
  if (num_classes < 2) throw DataError("prediction table needs K >= 2");
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (!seen.insert(row.id).second) {
      throw DataError("duplicate sample id in prediction table: " + row.id);
    }
    if (row.label < 0 || row.label >= num_classes) {
      throw DataError("label out of range for sample " + row.id);
    }
    if (static_cast<int>(row.probs.size()) != num_classes ||
        !is_on_simplex(row.probs)) {
      throw DataError("probability row off the simplex for sample " + row.id);
    }
  }
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::support(int true_class) const {
  std::int64_t n = 0;
  for (int p = 0; p < num_classes; ++p) n += at(true_class, p);
  return n;
}

ProbVector late_fuse(const ProbVector& a, const ProbVector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("late_fuse class-count mismatch: " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  std::vector<double> fused(a.values.size());
  for (std::size_t k = 0; k < fused.size(); ++k) {
    fused[k] = (a.values[k] + b.values[k]) / 2.0;
  }
  return ProbVector{std::move(fused)};
}

PredictionTable fuse_tables(const PredictionTable& a,
                            const PredictionTable& b) {
  if (a.num_classes != b.num_classes) {
    throw ShapeError("fuse_tables class-count mismatch");
  }
  std::map<std::string, const PredictionRow*> by_id;
  for (const auto& row : b.rows) by_id.emplace(row.id, &row);
  if (by_id.size() != b.rows.size()) {
    throw DataError("duplicate ids in fuse input");
  }

  std::map<std::string, PredictionRow> fused;
  for (const auto& row : a.rows) {
    const auto it = by_id.find(row.id);
    if (it == by_id.end()) {
      throw DataError("sample id only present in one table: " + row.id);
    }
    const PredictionRow& other = *it->second;
    if (other.label != row.label) {
      throw DataError("label disagreement for sample id: " + row.id);
    }
    const ProbVector p = late_fuse(ProbVector{row.probs},
                                   ProbVector{other.probs});
    fused.emplace(row.id, PredictionRow{row.id, row.label, p.values});
  }
  if (fused.size() != by_id.size()) {
    // b holds an id that a does not.
    for (const auto& row : b.rows) {
      if (fused.find(row.id) == fused.end()) {
        throw DataError("sample id only present in one table: " + row.id);
      }
    }
  }

  PredictionTable out;
  out.num_classes = a.num_classes;
  out.rows.reserve(fused.size());
  for (auto& [id, row] : fused) out.rows.push_back(std::move(row));
  return out;
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (values[static_cast<std::size_t>(k)] >
        values[static_cast<std::size_t>(best)]) {
      best = k;
    }
  }
  return best;
}

ConfusionMatrix confusion(const PredictionTable& preds) {
  if (preds.rows.empty()) throw DataError("confusion over empty table");
  ConfusionMatrix cm;
  cm.num_classes = preds.num_classes;
  cm.counts.assign(static_cast<std::size_t>(preds.num_classes) *
                       static_cast<std::size_t>(preds.num_classes),
                   0);
  for (const auto& row : preds.rows) {
    cm.at(row.label, argmax_lowest(row.probs)) += 1;
  }
  return cm;
}

double topk_accuracy(const PredictionTable& preds, int k) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  if (preds.rows.empty()) throw DataError("top-k over empty table");
  const int effective = std::min(k, preds.num_classes);
  std::int64_t hits = 0;
  std::vector<int> order(static_cast<std::size_t>(preds.num_classes));
  for (const auto& row : preds.rows) {
    std::iota(order.begin(), order.end(), 0);
    // Rank by probability descending; equal probabilities rank the lower
    // class index first, which makes the k-th-rank tie-break deterministic.
    std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
      return row.probs[static_cast<std::size_t>(lhs)] >
             row.probs[static_cast<std::size_t>(rhs)];
    });
    for (int r = 0; r < effective; ++r) {
      if (order[static_cast<std::size_t>(r)] == row.label) {
        ++hits;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(preds.rows.size());
}

std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(static_cast<std::size_t>(cm.num_classes));
  for (int c = 0; c < cm.num_classes; ++c) {
    const std::int64_t tp = cm.at(c, c);
    std::int64_t fp = 0;
    for (int t = 0; t < cm.num_classes; ++t) {
      if (t != c) fp += cm.at(t, c);
    }
    const std::int64_t support = cm.support(c);
    ClassMetrics& m = out[static_cast<std::size_t>(c)];
    m.support = support;
    m.precision = (tp + fp) > 0
                      ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                      : 0.0;
    m.recall = support > 0
                   ? static_cast<double>(tp) / static_cast<double>(support)
                   : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
  }
  return out;
}

WeightedMetrics weighted_aggregate(std::span<const ClassMetrics> per_class) {
  std::int64_t n = 0;
  for (const auto& m : per_class) n += m.support;
  if (n <= 0) throw DataError("weighted_aggregate with zero total support");
  WeightedMetrics w;
  for (const auto& m : per_class) {
    const double share =
        static_cast<double>(m.support) / static_cast<double>(n);
    w.precision += share * m.precision;
    w.recall += share * m.recall;
    w.f1 += share * m.f1;
  }
  return w;
}

EvalReport evaluate(const PredictionTable& preds, std::string fingerprint) {
  preds.validate();
  EvalReport report;
  report.confusion = confusion(preds);
  report.per_class = per_class_prf(report.confusion);
  report.weighted = weighted_aggregate(report.per_class);
  report.top1 = topk_accuracy(preds, 1);
  report.top5_effective_k = std::min(5, preds.num_classes);
  report.top5 = topk_accuracy(preds, report.top5_effective_k);
  report.fingerprint = std::move(fingerprint);
  return report;
}

std::vector<F1Delta> classwise_f1_delta(const EvalReport& report_a,
                                        const EvalReport& report_b) {
  if (report_a.per_class.size() != report_b.per_class.size()) {
    throw ShapeError("classwise_f1_delta over different class counts");
  }
  std::vector<F1Delta> deltas;
  deltas.reserve(report_a.per_class.size());
  for (std::size_t c = 0; c < report_a.per_class.size(); ++c) {
    F1Delta d;
    d.class_index = static_cast<int>(c);
    d.support = report_a.per_class[c].support;
    d.f1_a = report_a.per_class[c].f1;
    d.f1_b = report_b.per_class[c].f1;
    d.delta = d.f1_b - d.f1_a;
    d.recovered = report_a.per_class[c].f1 == 0.0 && report_b.per_class[c].f1 > 0.0;
    deltas.push_back(d);
  }
  // Head classes first; equal supports keep class-index order.
  std::stable_sort(deltas.begin(), deltas.end(),
                   [](const F1Delta& lhs, const F1Delta& rhs) {
                     return lhs.support > rhs.support;
                   });
  return deltas;
}

void write_prediction_table(const PredictionTable& table,
                            const std::string& path,
                            const std::string& fingerprint) {
  std::string out;
  out += "# fingerprint=" + fingerprint + "\n";
  out += "id,label";
  for (int k = 0; k < table.num_classes; ++k) {
    out += ",p" + std::to_string(k);
  }
  out += "\n";
  for (const auto& row : table.rows) {
    out += row.id;
    out += ',';
    out += std::to_string(row.label);
    for (double p : row.probs) {
      out += ',';
      out += detail::format_double(p);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

LoadedPredictions load_prediction_table(const std::string& path) {
  const std::string text = detail::read_file(path);
  LoadedPredictions result;
  PredictionTable& table = result.table;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  int expected_fields = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find("fingerprint=");
      if (eq != std::string::npos) {
        result.fingerprint = line.substr(eq + std::string("fingerprint=").size());
      }
      continue;
    }
    const auto fields = detail::split_csv(line);
    if (!header_seen) {
      if (fields.size() < 4 || fields[0] != "id" || fields[1] != "label") {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": bad prediction-table header");
      }
      expected_fields = static_cast<int>(fields.size());
      table.num_classes = expected_fields - 2;
      header_seen = true;
      continue;
    }
    const std::string where =
        "(" + path + ":" + std::to_string(line_no) + ")";
    if (static_cast<int>(fields.size()) != expected_fields) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(expected_fields) +
                      " fields, got " + std::to_string(fields.size()));
    }
    PredictionRow row;
    row.id = std::string(fields[0]);
    row.label = static_cast<int>(detail::parse_int(fields[1], where));
    row.probs.reserve(static_cast<std::size_t>(table.num_classes));
    for (int k = 0; k < table.num_classes; ++k) {
      row.probs.push_back(
          detail::parse_double(fields[static_cast<std::size_t>(k + 2)], where));
    }
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw DataError(path + ": missing header row");
  table.validate();
  return result;
}

namespace {

json report_to_json_obj(const EvalReport& r) {
  json per_class = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class.push_back({{"class", c},
                         {"support", m.support},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1}});
  }
  json confusion = json::array();
  for (int t = 0; t < r.confusion.num_classes; ++t) {
    json row = json::array();
    for (int p = 0; p < r.confusion.num_classes; ++p) {
      row.push_back(r.confusion.at(t, p));
    }
    confusion.push_back(std::move(row));
  }
  return json{{"fingerprint", r.fingerprint},
              {"samples", r.confusion.total()},
              {"num_classes", r.confusion.num_classes},
              {"top1", r.top1},
              {"top5", r.top5},
              {"top5_effective_k", r.top5_effective_k},
              {"weighted",
               {{"precision", r.weighted.precision},
                {"recall", r.weighted.recall},
                {"f1", r.weighted.f1}}},
              {"per_class", std::move(per_class)},
              {"confusion", std::move(confusion)}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  return report_to_json_obj(report).dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  EvalReport r;
  r.fingerprint = j.at("fingerprint").get<std::string>();
  r.top1 = j.at("top1").get<double>();
  r.top5 = j.at("top5").get<double>();
  r.top5_effective_k = j.at("top5_effective_k").get<int>();
  r.weighted.precision = j.at("weighted").at("precision").get<double>();
  r.weighted.recall = j.at("weighted").at("recall").get<double>();
  r.weighted.f1 = j.at("weighted").at("f1").get<double>();
  for (const auto& m : j.at("per_class")) {
    ClassMetrics cm;
    cm.support = m.at("support").get<std::int64_t>();
    cm.precision = m.at("precision").get<double>();
    cm.recall = m.at("recall").get<double>();
    cm.f1 = m.at("f1").get<double>();
    r.per_class.push_back(cm);
  }
  const auto& cj = j.at("confusion");
  r.confusion.num_classes = static_cast<int>(cj.size());
  for (const auto& row : cj) {
    for (const auto& v : row) {
      r.confusion.counts.push_back(v.get<std::int64_t>());
    }
  }
  return r;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];

  out << "fingerprint: " << r.fingerprint << "\n";
  std::snprintf(buf, sizeof(buf), "samples: %lld   classes: %d\n",
                static_cast<long long>(r.confusion.total()),
                r.confusion.num_classes);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "top-1: %.2f   top-%d: %.2f\n", r.top1, r.top5_effective_k,
                r.top5);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "weighted (pct): precision %.2f   recall %.2f   f1 %.2f\n",
                100.0 * r.weighted.precision, 100.0 * r.weighted.recall,
                100.0 * r.weighted.f1);
  out << buf;
  out << "\n class  support  precision   recall       f1\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    std::snprintf(buf, sizeof(buf), "%6zu  %7lld     %.4f   %.4f   %.4f\n", c,
                  static_cast<long long>(m.support), m.precision, m.recall,
                  m.f1);
    out << buf;
  }
  return out.str();
}

}  // namespace tailfuse
