#include "bench/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace gada::bench {

std::vector<std::array<double, 2>> pca2(const ad::Tensor& x) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto q = static_cast<Eigen::Index>(x.cols());
  std::vector<std::array<double, 2>> out(static_cast<std::size_t>(n), {0.0, 0.0});
  if (n == 0) return out;
  Eigen::MatrixXd m(n, q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  m.rowwise() -= m.colwise().mean();
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  // Eigenvalues ascend; take the last two.
  for (int c = 0; c < 2 && c < q; ++c) {
    const Eigen::Index col = q - 1 - c;
    if (eig.eigenvalues()(col) <= 1e-12 * std::max(1.0, eig.eigenvalues()(q - 1))) continue;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const Eigen::VectorXd proj = m * v;
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = proj(i);
  }
  return out;
}

FeatureTable export_features(const train::TrainState& state, const data::DomainShiftDataset& ds,
                             std::size_t n_per_split) {
  const data::DomainShiftDataset prepared = train::prepare(ds, state.hp);
  const auto& cls = state.nets.classifier;
  FeatureTable table;
  table.dim = cls.phi_dim();

  auto take = [&](const ad::Tensor& x, const std::vector<int>* labels, const char* split) {
    const std::size_t n = std::min(n_per_split, x.rows());
    if (n == 0) return;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    const ad::Tensor phi = nets::forward_classifier(cls, ad::gather_rows(x, idx)).phi;
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRow row;
      row.split = split;
      row.label = labels && i < labels->size() ? (*labels)[i] : -1;
      row.phi.assign(phi.data() + i * phi.cols(), phi.data() + (i + 1) * phi.cols());
      table.rows.push_back(std::move(row));
    }
  };
  take(prepared.source_x, &prepared.source_y, "source");
  take(prepared.test_x, &prepared.test_y, "target");
  if (n_per_split > 0) {
    const auto& gen = state.nets.generator;
    const ad::Tensor z = train::noise_batch(n_per_split, gen.noise_dim(), state.hp.seed,
                                            train::Stream::export_noise, 0);
    take(nets::forward_generator(gen, z), nullptr, "generated");
  }

  if (!table.rows.empty()) {
    std::vector<double> flat;
    flat.reserve(table.rows.size() * table.dim);
    for (const auto& r : table.rows) flat.insert(flat.end(), r.phi.begin(), r.phi.end());
    const auto pcs = pca2(ad::Tensor(ad::Tensor::unchecked, ad::Shape{table.rows.size(), table.dim}, std::move(flat)));
    for (std::size_t i = 0; i < pcs.size(); ++i) {
      table.rows[i].pc1 = pcs[i][0];
      table.rows[i].pc2 = pcs[i][1];
    }
  }
  return table;
}

std::string feature_csv(const FeatureTable& table) {
  std::string out = "split,label";
  for (std::size_t j = 1; j <= table.dim; ++j) out += ",f" + std::to_string(j);
  out += ",pc1,pc2\n";
  for (const auto& r : table.rows) {
    out += r.split;
    out += ',';
    out += std::to_string(r.label);
    for (double v : r.phi) {
      out += ',';
      out += format_double(v);
    }
    out += ',' + format_double(r.pc1) + ',' + format_double(r.pc2) + '\n';
  }
  return out;
}

FeatureTable parse_feature_csv(std::string_view text) {
  FeatureTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("feature CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 4 || header[0] != "split" || header[1] != "label" ||
      header[header.size() - 2] != "pc1" || header.back() != "pc2") {
    throw ParseError("feature CSV: header must be split,label,f1..fq,pc1,pc2");
  }
  table.dim = header.size() - 4;
  for (std::size_t j = 0; j < table.dim; ++j) {
    if (header[2 + j] != "f" + std::to_string(j + 1)) throw ParseError("feature CSV: bad column '" + header[2 + j] + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw ParseError("feature CSV line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    FeatureRow r;
    r.split = cells[0];
    try {
      const double lab = parse_double(cells[1], "label");
      r.label = static_cast<int>(lab);
      for (std::size_t j = 0; j < table.dim; ++j) r.phi.push_back(parse_double(cells[2 + j], "feature"));
      r.pc1 = parse_double(cells[cells.size() - 2], "pc1");
      r.pc2 = parse_double(cells.back(), "pc2");
    } catch (const ConfigError& e) {
      throw ParseError("feature CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << feature_csv(table);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

FeatureTable load_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_feature_csv(ss.str());
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

std::string color_for(int label) {
  if (label < 0) return "#999999";
  return kPalette[static_cast<std::size_t>(label) % std::size(kPalette)];
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string marker(const std::string& split, double x, double y, const std::string& color, const char* cls) {
  if (split == "target") {
    return "<rect class=\"" + std::string(cls) + "\" x=\"" + num(x - 3) + "\" y=\"" + num(y - 3) +
           "\" width=\"6\" height=\"6\" fill=\"" + color + "\" fill-opacity=\"0.7\"/>";
  }
  if (split == "generated") {
    return "<polygon class=\"" + std::string(cls) + "\" points=\"" + num(x) + "," + num(y - 4) + " " +
           num(x - 3.5) + "," + num(y + 3) + " " + num(x + 3.5) + "," + num(y + 3) + "\" fill=\"" + color +
           "\" fill-opacity=\"0.7\"/>";
  }
  return "<circle class=\"" + std::string(cls) + "\" cx=\"" + num(x) + "\" cy=\"" + num(y) +
         "\" r=\"3\" fill=\"" + color + "\" fill-opacity=\"0.7\"/>";
}

}  // namespace

std::string scatter_svg(const FeatureTable& table, std::string_view title) {
  constexpr double width = 720, height = 520, left = 50, top = 40, plot_w = 500, plot_h = 440;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& r : table.rows) {
    if (!std::isfinite(r.pc1) || !std::isfinite(r.pc2)) continue;
    if (first) {
      xmin = xmax = r.pc1;
      ymin = ymax = r.pc2;
      first = false;
    }
    xmin = std::min(xmin, r.pc1);
    xmax = std::max(xmax, r.pc1);
    ymin = std::min(ymin, r.pc2);
    ymax = std::max(ymax, r.pc2);
  }
  const double xr = xmax - xmin > 1e-12 ? xmax - xmin : 1.0;
  const double yr = ymax - ymin > 1e-12 ? ymax - ymin : 1.0;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
       escape_xml(title.empty() ? "feature projection" : title) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(plot_w) + "\" height=\"" +
       num(plot_h) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  s += "<g id=\"points\">\n";
  std::map<int, bool> labels;
  std::map<std::string, bool> splits;
  for (const auto& r : table.rows) {
    labels[r.label] = true;
    splits[r.split] = true;
    if (!std::isfinite(r.pc1) || !std::isfinite(r.pc2)) continue;
    const double x = left + 10 + (r.pc1 - xmin) / xr * (plot_w - 20);
    const double y = top + plot_h - 10 - (r.pc2 - ymin) / yr * (plot_h - 20);
    s += marker(r.split, x, y, color_for(r.label), "pt") + "\n";
  }
  s += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = top + 10;
  const double lx = left + plot_w + 20;
  for (const char* sp : {"source", "target", "generated"}) {
    s += marker(sp, lx + 4, ly, "#555555", "key") + "\n";
    s += "<text x=\"" + num(lx + 14) + "\" y=\"" + num(ly + 4) + "\">" + sp + "</text>\n";
    ly += 20;
  }
  ly += 10;
  for (const auto& [label, _] : labels) {
    s += "<rect class=\"key\" x=\"" + num(lx) + "\" y=\"" + num(ly - 4) + "\" width=\"8\" height=\"8\" fill=\"" +
         color_for(label) + "\"/>\n";
    s += "<text x=\"" + num(lx + 14) + "\" y=\"" + num(ly + 4) + "\">" +
         (label < 0 ? std::string("unlabeled") : "class " + std::to_string(label)) + "</text>\n";
    ly += 20;
  }
  s += "</g>\n</svg>\n";
  return s;
}

Separation cluster_separation(const FeatureTable& table) {
  Separation sep;
  std::map<int, std::vector<const std::vector<double>*>> groups;
  for (const auto& r : table.rows) {
    if (r.split == "target" && r.label >= 0) groups[r.label].push_back(&r.phi);
  }
  std::vector<std::vector<double>> centroids;
  std::vector<std::vector<const std::vector<double>*>> members;
  for (auto& [label, rows] : groups) {
    if (rows.size() < 2) {
      sep.warnings.push_back("class " + std::to_string(label) + " has fewer than two labeled target rows; excluded");
      continue;
    }
    std::vector<double> c(table.dim, 0.0);
    for (const auto* p : rows)
      for (std::size_t j = 0; j < table.dim; ++j) c[j] += (*p)[j];
    for (double& v : c) v /= static_cast<double>(rows.size());
    centroids.push_back(std::move(c));
    members.push_back(rows);
  }
  if (centroids.size() < 2) {
    throw ContractError("cluster separation needs at least two classes with two or more labeled target rows");
  }
  auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t j = 0; j < table.dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };
  double between = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < centroids.size(); ++a)
    for (std::size_t b = a + 1; b < centroids.size(); ++b, ++pairs) between += dist(centroids[a], centroids[b]);
  double within = 0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    for (const auto* p : members[c]) {
      within += dist(*p, centroids[c]);
      ++count;
    }
  }
  sep.classes = centroids.size();
  sep.between = between / static_cast<double>(pairs);
  sep.within = within / static_cast<double>(count);
  sep.value = sep.between / std::max(sep.within, 1e-12);
  return sep;
}

}  // namespace gada::bench
