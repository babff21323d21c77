#include "imam/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

namespace imam {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 72, kRight = 24, kTop = 44, kBottom = 56;
constexpr double kLegendWidth = 150;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double nice_num(double x, bool round_mode) {
  const double expv = std::floor(std::log10(x));
  const double f = x / std::pow(10.0, expv);
  double nf;
  if (round_mode)
    nf = f < 1.5 ? 1 : f < 3 ? 2 : f < 7 ? 5 : 10;
  else
    nf = f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10;
  return nf * std::pow(10.0, expv);
}

struct Axis {
  double lo = 0, hi = 1, step = 0.2;
};

Axis nice_axis(double lo, double hi, int ticks = 6) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0, 1, 0.2};
  if (lo == hi) {
    const double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double range = nice_num(hi - lo, false);
  Axis a;
  a.step = nice_num(range / (ticks - 1), true);
  a.lo = std::floor(lo / a.step) * a.step;
  a.hi = std::ceil(hi / a.step) * a.step;
  return a;
}

void header(std::ostringstream& out, const std::string& title, double width) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
      << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(width) << " "
      << fmt(kHeight) << "\">\n";
  out << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(kHeight)
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(width / 2)
      << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\" font-weight=\"bold\">"
      << escape_xml(title) << "</text>\n";
}

void y_grid(std::ostringstream& out, const Axis& ay, double plot_w,
            const std::string& y_label, bool log_scale) {
  const double plot_h = kHeight - kTop - kBottom;
  for (double v = ay.lo; v <= ay.hi + ay.step * 0.5; v += ay.step) {
    const double y = kTop + plot_h * (1.0 - (v - ay.lo) / (ay.hi - ay.lo));
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(y) << "\" x2=\""
        << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    const double label = log_scale ? std::pow(10.0, v) : v;
    out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(label) << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << fmt(kTop + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 "
      << fmt(kTop + plot_h / 2) << ")\">" << escape_xml(y_label) << "</text>\n";
}

void frame(std::ostringstream& out, double plot_w) {
  const double plot_h = kHeight - kTop - kBottom;
  out << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\""
      << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
      << "\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
}

}  // namespace

std::string svg_line_chart(const LineChart& chart) {
  const double width = kWidth + kLegendWidth;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : chart.series)
    for (const auto& p : s.points) {
      double y = p[1];
      if (chart.log_y) {
        if (y <= 0) continue;
        y = std::log10(y);
      }
      x_lo = std::min(x_lo, p[0]);
      x_hi = std::max(x_hi, p[0]);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  if (!std::isfinite(x_lo)) {
    x_lo = 0;
    x_hi = 1;
    y_lo = 0;
    y_hi = 1;
  }
  const Axis ax = nice_axis(x_lo, x_hi);
  const Axis ay = nice_axis(y_lo, y_hi);

  std::ostringstream out;
  header(out, chart.title, width);
  y_grid(out, ay, plot_w, chart.y_label, chart.log_y);
  for (double v = ax.lo; v <= ax.hi + ax.step * 0.5; v += ax.step) {
    const double x = kLeft + plot_w * (v - ax.lo) / (ax.hi - ax.lo);
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kHeight - kBottom + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape_xml(chart.x_label) << "</text>\n";

  int idx = 0;
  for (const auto& s : chart.series) {
    const char* color = kPalette[idx % kPaletteSize];
    std::ostringstream path;
    bool first = true;
    for (const auto& p : s.points) {
      double y = p[1];
      if (chart.log_y) {
        if (y <= 0) continue;
        y = std::log10(y);
      }
      const double px = kLeft + plot_w * (p[0] - ax.lo) / (ax.hi - ax.lo);
      const double py = kTop + plot_h * (1.0 - (y - ay.lo) / (ay.hi - ay.lo));
      path << (first ? "M" : " L") << fmt(px) << " " << fmt(py);
      first = false;
    }
    if (!first)
      out << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.6\"/>\n";
    const double ly = kTop + 16 + 20 * idx;
    out << "<line x1=\"" << fmt(kWidth + 4) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(kWidth + 28) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(kWidth + 34) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(s.name)
        << "</text>\n";
    ++idx;
  }
  frame(out, plot_w);
  out << "</svg>\n";
  return out.str();
}

std::string svg_bar_chart(const BarChart& chart) {
  const bool legend = chart.series.size() > 1;
  const double width = legend ? kWidth + kLegendWidth : kWidth;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double y_lo = 0, y_hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : chart.series)
    for (size_t i = 0; i < s.values.size(); ++i) {
      const double e = i < s.err.size() ? s.err[i] : 0;
      y_lo = std::min(y_lo, s.values[i] - e);
      y_hi = std::max(y_hi, s.values[i] + e);
    }
  if (!std::isfinite(y_hi)) y_hi = 1;
  const Axis ay = nice_axis(y_lo, y_hi);
  const auto to_y = [&](double v) {
    return kTop + plot_h * (1.0 - (v - ay.lo) / (ay.hi - ay.lo));
  };

  std::ostringstream out;
  header(out, chart.title, width);
  y_grid(out, ay, plot_w, chart.y_label, false);

  const size_t groups = chart.labels.size();
  const size_t ns = std::max<size_t>(1, chart.series.size());
  const double group_w = plot_w / std::max<size_t>(1, groups);
  const double bar_w = group_w * 0.8 / ns;
  for (size_t g = 0; g < groups; ++g) {
    for (size_t s = 0; s < chart.series.size(); ++s) {
      const auto& ser = chart.series[s];
      if (g >= ser.values.size()) continue;
      const double v = ser.values[g];
      const double x = kLeft + group_w * g + group_w * 0.1 + bar_w * s;
      const double y0 = to_y(std::max(0.0, ay.lo));
      const double y1 = to_y(v);
      out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(std::min(y0, y1))
          << "\" width=\"" << fmt(bar_w) << "\" height=\""
          << fmt(std::abs(y0 - y1)) << "\" fill=\""
          << kPalette[s % kPaletteSize] << "\"/>\n";
      if (g < ser.err.size() && ser.err[g] > 0) {
        const double cx = x + bar_w / 2;
        const double ya = to_y(v - ser.err[g]), yb = to_y(v + ser.err[g]);
        out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(ya) << "\" x2=\""
            << fmt(cx) << "\" y2=\"" << fmt(yb)
            << "\" stroke=\"#222222\" stroke-width=\"1.4\"/>\n";
        for (double yy : {ya, yb})
          out << "<line x1=\"" << fmt(cx - 4) << "\" y1=\"" << fmt(yy) << "\" x2=\""
              << fmt(cx + 4) << "\" y2=\"" << fmt(yy)
              << "\" stroke=\"#222222\" stroke-width=\"1.4\"/>\n";
      }
    }
    const double cx = kLeft + group_w * g + group_w / 2;
    out << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(kHeight - kBottom + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape_xml(chart.labels[g]) << "</text>\n";
  }
  if (legend) {
    for (size_t s = 0; s < chart.series.size(); ++s) {
      const double ly = kTop + 16 + 20 * double(s);
      out << "<rect x=\"" << fmt(kWidth + 4) << "\" y=\"" << fmt(ly - 8)
          << "\" width=\"14\" height=\"14\" fill=\"" << kPalette[s % kPaletteSize]
          << "\"/>\n";
      out << "<text x=\"" << fmt(kWidth + 24) << "\" y=\"" << fmt(ly + 4)
          << "\" font-family=\"sans-serif\" font-size=\"12\">"
          << escape_xml(chart.series[s].name) << "</text>\n";
    }
  }
  frame(out, plot_w);
  out << "</svg>\n";
  return out.str();
}

namespace {

struct ReportWriter {
  std::string dir;
  std::vector<std::string> files;
  std::ostringstream index;

  void add_svg(const std::string& name, const std::string& svg) {
    write_text_file(dir + "/" + name, svg);
    files.push_back(name);
    index << "![" << name << "](" << name << ")\n\n";
  }
  void table(const json& obj) {
    index << "| key | value |\n|---|---|\n";
    for (auto it = obj.begin(); it != obj.end(); ++it)
      index << "| " << it.key() << " | " << it.value().dump() << " |\n";
    index << "\n";
  }
};

json load_log(const json& record, const std::string& in_path, const char* name) {
  if (record.contains("results") && record["results"].contains("log")) {
    const std::string p = record["results"]["log"].get<std::string>();
    if (fs::exists(p)) return read_json_file(p);
  }
  const std::string beside = fs::path(in_path).parent_path() / name;
  if (fs::exists(beside)) return read_json_file(beside);
  return json::array();
}

void report_train_ae(ReportWriter& w, const json& record, const std::string& in_path) {
  const json log = load_log(record, in_path, "train-ae-log.json");
  LineChart loss{"stage-1 training", "iteration", "loss", {}, true};
  Series total{"total", {}}, occ{"occupancy", {}}, book{"codebook", {}};
  Series iou{"voxel iou", {}};
  for (const auto& e : log) {
    if (e.contains("loss")) {
      const double it = e["iter"].get<double>();
      total.points.push_back({it, e["loss"].get<double>()});
      occ.points.push_back({it, e["occupancy"].get<double>()});
      book.points.push_back({it, e["codebook"].get<double>()});
    } else if (e.contains("iou")) {
      iou.points.push_back({e["iter"].get<double>(), e["iou"].get<double>()});
    }
  }
  loss.series = {total, occ, book};
  w.add_svg("train-ae-loss.svg", svg_line_chart(loss));
  if (!iou.points.empty()) {
    LineChart c{"reconstruction probe", "iteration", "voxel iou", {iou}, false};
    w.add_svg("train-ae-iou.svg", svg_line_chart(c));
  }
  w.table(record["results"]);
}

void report_train_prior(ReportWriter& w, const json& record,
                        const std::string& in_path) {
  const json log = load_log(record, in_path, "train-prior-log.json");
  Series nll{"nll", {}};
  for (const auto& e : log)
    if (e.contains("nll"))
      nll.points.push_back({e["iter"].get<double>(), e["nll"].get<double>()});
  LineChart c{"stage-2 training", "iteration", "nll (nats/token)", {nll}, true};
  w.add_svg("train-prior-nll.svg", svg_line_chart(c));
  w.table(record["results"]);
}

void report_evaluate(ReportWriter& w, const json& record) {
  const json& m = record["results"]["metrics"];
  BarChart rates{"set metrics (rates)", "value", {}, {{"value", {}, {}}}};
  BarChart dists{"set metrics (distances)", "value", {}, {{"value", {}, {}}}};
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (!it.value().is_number()) continue;
    const std::string& k = it.key();
    const bool rate = k == "cov" || k == "covt" || k == "covt_inf" ||
                      k == "nna_1" || k == "noise_nna_1" ||
                      k == "condition_accuracy" || k == "classifier_accuracy_ref";
    BarChart& c = rate ? rates : dists;
    c.labels.push_back(k);
    c.series[0].values.push_back(it.value().get<double>());
  }
  if (!rates.labels.empty()) w.add_svg("evaluate-rates.svg", svg_bar_chart(rates));
  if (!dists.labels.empty())
    w.add_svg("evaluate-distances.svg", svg_bar_chart(dists));
  w.table(m);
}

void report_reconstruct(ReportWriter& w, const json& record) {
  const json& res = record["results"];
  BarChart c{"reconstruction iou by shape", "voxel iou", {}, {{"iou", {}, {}}}};
  for (const auto& row : res["shapes"]) {
    c.labels.push_back(std::to_string(row["record"].get<int>()));
    c.series[0].values.push_back(row["iou"].get<double>());
  }
  w.add_svg("reconstruct-iou.svg", svg_bar_chart(c));
  json summary = {{"split", res["split"]},
                  {"count", res["count"]},
                  {"mean_iou", res["mean_iou"]}};
  if (res.contains("mean_chamfer")) summary["mean_chamfer"] = res["mean_chamfer"];
  w.table(summary);
}

void report_complete(ReportWriter& w, const json& record) {
  const json& res = record["results"];
  BarChart c{"completion distance to partial input", "uhd", {}, {}};
  c.series = {{"completions", {}, {}}, {"full reference", {}, {}}};
  BarChart t{"completion diversity", "tmd", {}, {{"tmd", {}, {}}}};
  for (const auto& row : res["rows"]) {
    const std::string label = std::to_string(row["record"].get<int>());
    c.labels.push_back(label);
    c.series[0].values.push_back(row["uhd"].get<double>());
    c.series[1].values.push_back(row["baseline_uhd"].get<double>());
    t.labels.push_back(label);
    t.series[0].values.push_back(row["tmd"].get<double>());
  }
  w.add_svg("complete-uhd.svg", svg_bar_chart(c));
  w.add_svg("complete-tmd.svg", svg_bar_chart(t));
  w.table(json{{"mode", res["mode"]},
               {"inputs", res["inputs"]},
               {"per_input", res["per_input"]},
               {"mean_uhd", res["mean_uhd"]},
               {"mean_baseline_uhd", res["mean_baseline_uhd"]},
               {"min_tmd", res["min_tmd"]}});
}

void report_sample(ReportWriter& w, const json& record) { w.table(record["results"]); }

void report_ablate(ReportWriter& w, const json& record) {
  const json& res = record["results"];
  const std::string study = res["study"].get<std::string>();
  if (study == "representation") {
    BarChart iou{"representation study: reconstruction", "voxel iou", {}, {{"iou", {}, {}}}};
    BarChart nna{"representation study: generation", "1-nna", {}, {{"nna_1", {}, {}}}};
    for (const auto& row : res["rows"]) {
      const std::string mode = row["mode"].get<std::string>();
      iou.labels.push_back(mode);
      iou.series[0].values.push_back(row["iou"].get<double>());
      nna.labels.push_back(mode);
      nna.series[0].values.push_back(row["nna_1"].get<double>());
    }
    w.add_svg("ablate-representation-iou.svg", svg_bar_chart(iou));
    w.add_svg("ablate-representation-nna.svg", svg_bar_chart(nna));
    w.table(json{{"study", study}});
    return;
  }
  // order study: mean over seeds per (mode, order), whiskers = across-seed std
  std::map<std::string, std::vector<double>> vals;
  std::vector<std::string> order_keys;
  for (const auto& row : res["rows"]) {
    const std::string key =
        row["mode"].get<std::string>() + "/" + row["order"].get<std::string>();
    if (!vals.count(key)) order_keys.push_back(key);
    vals[key].push_back(row["nna_1"].get<double>());
  }
  BarChart c{"order study: 1-nna by flatten order", "1-nna", {}, {{"nna_1", {}, {}}}};
  for (const auto& key : order_keys) {
    const auto& v = vals[key];
    double mean = 0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    c.labels.push_back(key);
    c.series[0].values.push_back(mean);
    c.series[0].err.push_back(std::sqrt(var / double(v.size())));
  }
  w.add_svg("ablate-order-nna.svg", svg_bar_chart(c));
  json summary = {{"study", study}};
  if (res.contains("order_std_nna_1"))
    summary["order_std_nna_1"] = res["order_std_nna_1"];
  if (res.contains("vector_leq_triplane"))
    summary["vector_leq_triplane"] = res["vector_leq_triplane"];
  w.table(summary);
}

}  // namespace

json cmd_report(const std::string& in_path, const std::string& out_dir) {
  if (!fs::exists(in_path)) throw IoError("missing run record: " + in_path);
  const json record = read_json_file(in_path);
  if (!record.contains("command"))
    throw FormatError("not a run record (no command field): " + in_path);
  const std::string command = record["command"].get<std::string>();

  ReportWriter w;
  w.dir = out_dir.empty() ? (fs::path(in_path).parent_path() / "report").string()
                          : out_dir;
  fs::create_directories(w.dir);
  w.index << "# " << command << "\n\n";

  if (command == "train-ae") report_train_ae(w, record, in_path);
  else if (command == "train-prior") report_train_prior(w, record, in_path);
  else if (command == "evaluate") report_evaluate(w, record);
  else if (command == "reconstruct") report_reconstruct(w, record);
  else if (command == "complete") report_complete(w, record);
  else if (command == "sample" || command == "gen-data") report_sample(w, record);
  else if (command == "ablate-order" || command == "ablate-representation")
    report_ablate(w, record);
  else throw FormatError("no report renderer for command: " + command);

  write_text_file(w.dir + "/index.md", w.index.str());
  w.files.push_back("index.md");
  std::printf("report: wrote %zu files to %s\n", w.files.size(), w.dir.c_str());
  return json{{"command", command}, {"in", in_path}, {"out", w.dir},
              {"files", w.files}};
}

}  // namespace imam
