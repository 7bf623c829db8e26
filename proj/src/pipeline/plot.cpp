#include <iomanip>
#include <sstream>

#include "circlesnake/error.hpp"
#include "circlesnake/pipeline.hpp"

namespace circlesnake::pipeline {

using nlohmann::json;

namespace {

constexpr double kPanel = 260.0;
constexpr double kMargin = 40.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void panel(std::ostringstream& svg, double x0, const std::string& title, const json& section) {
  const double y0 = kMargin;
  svg << "<g transform=\"translate(" << x0 << "," << y0 << ")\">\n";
  svg << "<rect width=\"" << kPanel << "\" height=\"" << kPanel << "\" fill=\"none\" stroke=\"#444\"/>\n";
  svg << "<text x=\"" << kPanel / 2 << "\" y=\"-8\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";
  svg << "<text x=\"" << kPanel / 2 << "\" y=\"" << kPanel + 28
      << "\" text-anchor=\"middle\" font-size=\"11\">recall</text>\n";
  svg << "<text x=\"-26\" y=\"" << kPanel / 2 << "\" font-size=\"11\" transform=\"rotate(-90 -26 "
      << kPanel / 2 << ")\" text-anchor=\"middle\">precision</text>\n";
  const std::pair<const char*, const char*> curves[] = {{"pr50", "#1f77b4"}, {"pr75", "#d62728"}};
  int legend = 0;
  for (const auto& [key, color] : curves) {
    const auto pr = section.value(key, std::vector<double>{});
    if (pr.size() >= 2) {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < pr.size(); ++i) {
        const double rx = kPanel * static_cast<double>(i) / static_cast<double>(pr.size() - 1);
        svg << std::fixed << std::setprecision(2) << rx << "," << kPanel * (1.0 - pr[i]) << " ";
      }
      svg << "\"/>\n";
    }
    svg << "<text x=\"8\" y=\"" << 16 + 14 * legend << "\" font-size=\"11\" fill=\"" << color << "\">"
        << (std::string(key) == "pr50" ? "IoU 0.50" : "IoU 0.75") << "</text>\n";
    ++legend;
  }
  svg << "</g>\n";
}

}  // namespace

std::string render_pr_svg(const json& report) {
  if (!report.is_object() || !report.contains("config_hash")) {
    throw InvalidInput("plot: report has no config_hash");
  }
  const std::string hash = report.at("config_hash").get<std::string>();
  const std::pair<const char*, const char*> sections[] = {{"detection", "circle detection"},
                                                         {"segmentation", "contour segmentation"},
                                                         {"circle_proposal", "circle proposal"}};
  int panels = 0;
  for (const auto& [key, _] : sections) panels += report.contains(key) ? 1 : 0;
  if (panels == 0) throw InvalidInput("plot: report has no detection or segmentation section");
  for (const auto& [key, _] : sections) {
    if (report.contains(key) && report.at(key).value("config_hash", hash) != hash) {
      throw InvalidInput(std::string("plot: section '") + key + "' has a different config hash");
    }
  }

  const double width = kMargin + panels * (kPanel + kMargin);
  const double height = kPanel + 2.5 * kMargin;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\">\n";
  svg << "<!-- config_hash " << escape(hash) << " -->\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  int k = 0;
  for (const auto& [key, title] : sections) {
    if (!report.contains(key)) continue;
    panel(svg, kMargin + k * (kPanel + kMargin), title, report.at(key));
    ++k;
  }
  svg << "<text x=\"" << kMargin << "\" y=\"" << height - 6 << "\" font-size=\"10\" fill=\"#666\">config "
      << escape(hash) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace circlesnake::pipeline
