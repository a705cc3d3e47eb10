#include "tpwate/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tpwate {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t row, const std::string& col) {
  std::string s = trim(raw);
  if (s.empty()) return std::nan("");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("malformed numeric cell at row " + std::to_string(row) +
                                ", column '" + col + "': '" + s + "'");
  return value;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  throw std::invalid_argument("column '" + name + "' not found in header");
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void ObservationTable::check() const {
  const Eigen::Index nn = n();
  if (y.size() != nn || delta.size() != nn || q.size() != nn || v.rows() != nn ||
      w.rows() != nn)
    throw std::invalid_argument("column lengths disagree");
  if (static_cast<Eigen::Index>(v_names.size()) != v.cols() ||
      static_cast<Eigen::Index>(w_names.size()) != w.cols())
    throw std::invalid_argument("column name lists do not match matrix widths");
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (a[i] != 0 && a[i] != 1)
      throw std::invalid_argument("treatment not in {0,1} at row " + std::to_string(i));
    if (delta[i] != 0 && delta[i] != 1)
      throw std::invalid_argument("delta not in {0,1} at row " + std::to_string(i));
    if (!(q[i] > 0.0) || q[i] > 1.0)
      throw std::invalid_argument("q out of (0,1] at row " + std::to_string(i));
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      if (std::isnan(v(i, j)))
        throw std::invalid_argument("covariate '" + v_names[j] + "' missing at row " +
                                    std::to_string(i));
    if (delta[i] == 1) {
      if (std::isnan(y[i]))
        throw std::invalid_argument("outcome missing at phase-2 row " + std::to_string(i));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        if (std::isnan(w(i, j)))
          throw std::invalid_argument("covariate '" + w_names[j] +
                                      "' missing at phase-2 row " + std::to_string(i));
    }
  }
}

double ObservationTable::phase1_value(const std::string& column, Eigen::Index row) const {
  if (column == treat_name) return static_cast<double>(a[row]);
  if (column == outcome_name) return y[row];
  for (std::size_t j = 0; j < v_names.size(); ++j)
    if (v_names[j] == column) return v(row, static_cast<Eigen::Index>(j));
  for (const auto& wn : w_names)
    if (wn == column)
      throw std::invalid_argument("column '" + column +
                                  "' is phase-2 only and cannot key strata");
  throw std::invalid_argument("unknown column '" + column + "'");
}

ObservationTable ObservationTable::subset(const std::vector<int>& keep_rows) const {
  ObservationTable out;
  const Eigen::Index m = static_cast<Eigen::Index>(keep_rows.size());
  out.a.resize(m);
  out.y.resize(m);
  out.v.resize(m, v.cols());
  out.w.resize(m, w.cols());
  out.delta.resize(m);
  out.q.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index r = keep_rows[static_cast<std::size_t>(i)];
    out.a[i] = a[r];
    out.y[i] = y[r];
    out.v.row(i) = v.row(r);
    out.w.row(i) = w.row(r);
    out.delta[i] = delta[r];
    out.q[i] = q[r];
  }
  out.v_names = v_names;
  out.w_names = w_names;
  out.treat_name = treat_name;
  out.outcome_name = outcome_name;
  return out;
}

ObservationTable load_observations(std::istream& in, const ColumnRoles& roles) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty input: no header");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  const int c_delta = find_column(header, roles.delta_col);
  const int c_q = find_column(header, roles.q_col);
  const int c_a = find_column(header, roles.treat_col);
  const int c_y = find_column(header, roles.outcome_col);
  std::vector<int> c_v, c_w;
  for (const auto& name : roles.v_cols) c_v.push_back(find_column(header, name));
  for (const auto& name : roles.w_cols) c_w.push_back(find_column(header, name));

  std::vector<double> va, vy, vdelta, vq;
  std::vector<std::vector<double>> vv(c_v.size()), vw(c_w.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    auto cell = [&](int j) { return parse_cell(cells[j], row, header[j]); };
    vdelta.push_back(cell(c_delta));
    vq.push_back(cell(c_q));
    va.push_back(cell(c_a));
    vy.push_back(cell(c_y));
    for (std::size_t j = 0; j < c_v.size(); ++j) vv[j].push_back(cell(c_v[j]));
    for (std::size_t j = 0; j < c_w.size(); ++j) vw[j].push_back(cell(c_w[j]));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(va.size());
  ObservationTable t;
  t.a.resize(n);
  t.y.resize(n);
  t.delta.resize(n);
  t.q.resize(n);
  t.v.resize(n, static_cast<Eigen::Index>(c_v.size()));
  t.w.resize(n, static_cast<Eigen::Index>(c_w.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(vdelta[i]) || std::isnan(vq[i]) || std::isnan(va[i]))
      throw std::invalid_argument("delta, q, and treatment may not be missing (row " +
                                  std::to_string(i + 1) + ")");
    t.delta[i] = static_cast<int>(vdelta[i]);
    t.q[i] = vq[i];
    t.a[i] = static_cast<int>(va[i]);
    t.y[i] = vy[i];
    for (std::size_t j = 0; j < vv.size(); ++j)
      t.v(i, static_cast<Eigen::Index>(j)) = vv[j][i];
    for (std::size_t j = 0; j < vw.size(); ++j)
      t.w(i, static_cast<Eigen::Index>(j)) = vw[j][i];
  }
  t.v_names = roles.v_cols;
  t.w_names = roles.w_cols;
  t.treat_name = roles.treat_col;
  t.outcome_name = roles.outcome_col;
  t.check();
  return t;
}

ObservationTable load_observations_file(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  return load_observations(in, roles);
}

void save_observations(std::ostream& out, const ObservationTable& t) {
  out << t.treat_name << ',' << t.outcome_name;
  for (const auto& n : t.v_names) out << ',' << n;
  for (const auto& n : t.w_names) out << ',' << n;
  out << ",delta,q\n";
  auto put = [&](double x) {
    if (!std::isnan(x)) out << format_double(x);
  };
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    out << t.a[i] << ',';
    put(t.y[i]);
    for (Eigen::Index j = 0; j < t.v.cols(); ++j) {
      out << ',';
      put(t.v(i, j));
    }
    for (Eigen::Index j = 0; j < t.w.cols(); ++j) {
      out << ',';
      put(t.w(i, j));
    }
    out << ',' << t.delta[i] << ',' << format_double(t.q[i]) << '\n';
  }
}

void save_observations_file(const std::string& path, const ObservationTable& t) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open '" + path + "' for writing");
  save_observations(out, t);
}

StratumIndex build_strata(const ObservationTable& t,
                          const std::vector<std::string>& key_columns) {
  const Eigen::Index n = t.n();
  StratumIndex idx;
  idx.key_columns = key_columns;
  idx.labels.assign(static_cast<std::size_t>(n), 0);

  // Collect per-row key tuples; reject missing key values.
  std::vector<std::vector<double>> row_keys(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> key;
    key.reserve(key_columns.size());
    for (const auto& col : key_columns) {
      double x = t.phase1_value(col, i);
      if (std::isnan(x))
        throw std::invalid_argument("key column '" + col + "' has missing values (row " +
                                    std::to_string(i) + ")");
      key.push_back(x);
    }
    row_keys[static_cast<std::size_t>(i)] = std::move(key);
  }

  // std::map orders tuples lexicographically, which fixes the labels.
  std::map<std::vector<double>, int> label_of;
  for (const auto& key : row_keys) label_of.emplace(key, 0);
  int next = 0;
  for (auto& [key, lab] : label_of) {
    lab = next++;
    idx.keys.push_back(key);
  }

  const int K = next;
  idx.counts.assign(K, 0);
  idx.phase2_counts.assign(K, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = label_of[row_keys[static_cast<std::size_t>(i)]];
    idx.labels[static_cast<std::size_t>(i)] = k;
    ++idx.counts[k];
    if (t.delta[i] == 1) ++idx.phase2_counts[k];
  }
  idx.shares.resize(K);
  for (int k = 0; k < K; ++k)
    idx.shares[k] = static_cast<double>(idx.counts[k]) / static_cast<double>(n);

  // q must be constant within a stratum (it is a function of S).
  std::vector<double> q_ref(K, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int k = idx.labels[static_cast<std::size_t>(i)];
    if (q_ref[k] < 0.0) {
      q_ref[k] = t.q[i];
    } else if (std::abs(t.q[i] - q_ref[k]) > 1e-12 * std::max(1.0, std::abs(q_ref[k]))) {
      throw std::invalid_argument("q varies within stratum " + std::to_string(k));
    }
  }
  return idx;
}

ValidationReport validate(const ObservationTable& t) {
  ValidationReport r;
  try {
    t.check();
  } catch (const std::exception& e) {
    r.violations.push_back(e.what());
  }
  const Eigen::Index n = t.n();
  r.phase2_fraction = n > 0 ? static_cast<double>(t.phase2_count()) / n : 0.0;
  if (n > 0 && t.delta.minCoeff() == 1 && t.q.minCoeff() == 1.0)
    r.notes.push_back("single-phase data: delta=1 and q=1 everywhere");
  return r;
}

ValidationReport validate(const ObservationTable& t, const StratumIndex& s) {
  ValidationReport r = validate(t);
  r.stratum_phase2_counts = s.phase2_counts;
  for (int k = 0; k < s.K(); ++k)
    if (s.counts[k] > 0 && s.phase2_counts[k] == 0)
      r.warnings.push_back("empty phase-2 stratum " + std::to_string(k));
  return r;
}

}  // namespace tpwate
