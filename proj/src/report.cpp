#include "scenecast/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "scenecast/error.hpp"

namespace scenecast::report {

namespace {

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
                                    "#1f77b4", "#2ca02c"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

double nice_ceiling(double v) {
  if (v <= 0) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double step : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (step * mag >= v) return step * mag;
  }
  return 10.0 * mag;
}

void axis(std::ostream& out, double left, double top, double height, double width, double ymax) {
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
      << num(top + height) << "\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + height) << "\" x2=\"" << num(left + width)
      << "\" y2=\"" << num(top + height) << "\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = ymax * t / 5.0;
    const double y = top + height - height * t / 5.0;
    out << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + width)
        << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
  }
}

}  // namespace

std::string slug(const std::string& text) {
  std::string out;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "x" : out;
}

std::string best_label(const std::string& city, const std::vector<experiment::SummaryRow>& rows) {
  std::string best;
  double best_mean = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.city == city && r.test_year == 0 && r.mean < best_mean) {
      best_mean = r.mean;
      best = r.label;
    }
  }
  if (best.empty()) throw Error("no summary rows for city " + city);
  return best;
}

void write_rmse_chart(std::ostream& out, const std::string& city, const std::string& hash,
                      const std::vector<experiment::SummaryRow>& rows) {
  std::vector<std::string> labels;
  std::vector<int> years;
  double ymax = 0.0;
  for (const auto& r : rows) {
    if (r.city != city || r.test_year == 0) continue;
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) labels.push_back(r.label);
    if (std::find(years.begin(), years.end(), r.test_year) == years.end()) years.push_back(r.test_year);
    ymax = std::max(ymax, r.mean + r.half_width.value_or(0.0));
  }
  if (labels.empty()) throw Error("no summary rows for city " + city);
  std::sort(years.begin(), years.end());
  ymax = nice_ceiling(ymax);

  const double left = 60, top = 40, plot_h = 300;
  const double bar_w = 14, group_gap = 30;
  const double group_w = bar_w * static_cast<double>(labels.size());
  const double plot_w = static_cast<double>(years.size()) * (group_w + group_gap) + group_gap;
  const double legend_w = 260;
  const double width = left + plot_w + legend_w;
  const double height = std::max(top + plot_h + 50, top + 20.0 * static_cast<double>(labels.size()) + 20);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" font-family=\"sans-serif\">\n";
  out << "<!-- config_hash=" << escape(hash) << " -->\n";
  out << "<text x=\"" << num(left) << "\" y=\"22\" font-size=\"15\">" << escape(city)
      << ": mean RMSE with 95% CI</text>\n";
  axis(out, left, top, plot_h, plot_w, ymax);
  for (std::size_t yi = 0; yi < years.size(); ++yi) {
    const double gx = left + group_gap + static_cast<double>(yi) * (group_w + group_gap);
    out << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(top + plot_h + 18)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << years[yi] << "</text>\n";
    for (std::size_t li = 0; li < labels.size(); ++li) {
      auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) {
        return r.city == city && r.label == labels[li] && r.test_year == years[yi];
      });
      if (it == rows.end()) continue;
      const double x = gx + static_cast<double>(li) * bar_w;
      const double h = plot_h * it->mean / ymax;
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(top + plot_h - h) << "\" width=\""
          << num(bar_w - 2) << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[li % std::size(kPalette)]
          << "\"><title>" << escape(labels[li]) << ": " << num(it->mean) << "</title></rect>\n";
      if (it->half_width) {
        const double cx = x + (bar_w - 2) / 2;
        const double y1 = top + plot_h - plot_h * (it->mean - *it->half_width) / ymax;
        const double y2 = top + plot_h - plot_h * (it->mean + *it->half_width) / ymax;
        out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(cx) << "\" y2=\""
            << num(y2) << "\" stroke=\"#000\"/>\n";
        for (double y : {y1, y2}) {
          out << "<line x1=\"" << num(cx - 3) << "\" y1=\"" << num(y) << "\" x2=\"" << num(cx + 3)
              << "\" y2=\"" << num(y) << "\" stroke=\"#000\"/>\n";
        }
      }
    }
  }
  const double lx = left + plot_w + 20;
  for (std::size_t li = 0; li < labels.size(); ++li) {
    const double ly = top + 20.0 * static_cast<double>(li);
    out << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly) << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[li % std::size(kPalette)] << "\"/>\n";
    out << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(ly + 11) << "\" font-size=\"12\">"
        << escape(labels[li]) << "</text>\n";
  }
  out << "</svg>\n";
}

void write_fsa_chart(std::ostream& out, const std::string& city, const std::string& label,
                     const std::string& hash, const std::vector<experiment::FsaRow>& rows) {
  std::vector<const experiment::FsaRow*> picked;
  double ymax = 0.0;
  for (const auto& r : rows) {
    if (r.city == city && r.label == label && r.test_year == 0) {
      picked.push_back(&r);
      ymax = std::max(ymax, r.mean_rmse);
    }
  }
  if (picked.empty()) throw Error("no per-FSA rows for " + city + " / " + label);
  ymax = nice_ceiling(ymax);
  const double left = 60, top = 40, plot_h = 260, bar_w = 22;
  const double plot_w = bar_w * static_cast<double>(picked.size()) + 20;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(left + plot_w + 120)
      << "\" height=\"" << num(top + plot_h + 60) << "\" font-family=\"sans-serif\">\n";
  out << "<!-- config_hash=" << escape(hash) << " -->\n";
  out << "<text x=\"" << num(left) << "\" y=\"22\" font-size=\"15\">" << escape(city) << ": per-FSA RMSE, "
      << escape(label) << "</text>\n";
  axis(out, left, top, plot_h, plot_w, ymax);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto& r = *picked[i];
    const double x = left + 10 + bar_w * static_cast<double>(i);
    const double h = plot_h * r.mean_rmse / ymax;
    const char* colour = r.region == metrics::Region::West ? "#e15759" : "#4e79a7";
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(top + plot_h - h) << "\" width=\"" << num(bar_w - 3)
        << "\" height=\"" << num(h) << "\" fill=\"" << colour << "\"><title>" << r.fsa << ": "
        << num(r.mean_rmse) << "</title></rect>\n";
    out << "<text x=\"" << num(x + bar_w / 2) << "\" y=\"" << num(top + plot_h + 14)
        << "\" font-size=\"9\" text-anchor=\"middle\">" << r.fsa << "</text>\n";
  }
  const double lx = left + plot_w + 15;
  out << "<rect x=\"" << num(lx) << "\" y=\"" << num(top) << "\" width=\"12\" height=\"12\" fill=\"#e15759\"/>"
      << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(top + 11) << "\" font-size=\"12\">west</text>\n";
  out << "<rect x=\"" << num(lx) << "\" y=\"" << num(top + 20) << "\" width=\"12\" height=\"12\" fill=\"#4e79a7\"/>"
      << "<text x=\"" << num(lx + 18) << "\" y=\"" << num(top + 31) << "\" font-size=\"12\">east</text>\n";
  out << "</svg>\n";
}

}  // namespace scenecast::report
