#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <system_error>

#include "mombayes/experiments.hpp"
#include "mombayes/stats.hpp"

namespace mombayes::app {

namespace fs = std::filesystem;

ParseError::ParseError(std::size_t row, std::string column, const std::string& what)
    : Error("row " + std::to_string(row) + (column.empty() ? "" : ", column '" + column + "'") +
            ": " + what),
      row_(row),
      column_(std::move(column)) {}

ZeroVariance::ZeroVariance(std::string column)
    : Error("column '" + column + "' has zero variance"), column_(std::move(column)) {}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == delim && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string normalize_name(std::string name) {
  std::replace(name.begin(), name.end(), ' ', '.');
  return name;
}

bool parse_number(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, cell.data() + cell.size(), value);
  return res.ec == std::errc() && res.ptr == cell.data() + cell.size() && std::isfinite(value);
}

}  // namespace

RawData load_csv(const fs::path& path, const std::string& response,
                 const std::vector<std::string>& features) {
  std::ifstream in(path);
  if (!fs::is_regular_file(path) || !in) throw FileNotFound("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw ParseError(0, "", "missing header row");
  const char delim = line.find(';') != std::string::npos ? ';' : ',';
  std::vector<std::string> header = split_fields(line, delim);
  for (auto& h : header) h = normalize_name(h);

  auto index_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), normalize_name(name));
    if (it == header.end()) throw MissingColumn("column '" + name + "' not found in the header");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> cols{response.empty() ? std::size_t{0} : index_of(response)};
  for (const auto& f : features) cols.push_back(index_of(f));

  RawData raw;
  for (std::size_t c : cols) raw.names.push_back(header[c]);
  raw.columns.resize(cols.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line, delim);
    if (fields.size() != header.size())
      throw ParseError(row, "", "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double v = 0.0;
      if (!parse_number(fields[cols[j]], v))
        throw ParseError(row, header[cols[j]], "non-numeric cell '" + fields[cols[j]] + "'");
      raw.columns[j].push_back(v);
    }
  }
  if (row == 0) throw ParseError(0, "", "no data rows");
  return raw;
}

RawData standardize(const RawData& raw, Transform* record) {
  RawData out = raw;
  Transform t;
  for (std::size_t j = 0; j < raw.columns.size(); ++j) {
    const auto& col = raw.columns[j];
    const double m = mean(col);
    const double sd = std::sqrt(variance(col));
    if (!(sd > 0.0) || !std::isfinite(sd)) throw ZeroVariance(raw.names[j]);
    for (double& v : out.columns[j]) v = (v - m) / sd;
    t.names.push_back(raw.names[j]);
    t.mean.push_back(m);
    t.sd.push_back(sd);
  }
  if (record) *record = std::move(t);
  return out;
}

Dataset to_dataset(const RawData& raw) {
  if (raw.columns.empty()) throw EmptyData("no columns");
  if (raw.features() == 0) return Dataset::scalars(raw.columns.front());
  const std::size_t p = raw.features() + 1;
  std::vector<double> design;
  design.reserve(raw.rows() * p);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    design.push_back(1.0);
    for (std::size_t j = 1; j < raw.columns.size(); ++j) design.push_back(raw.columns[j][i]);
  }
  return Dataset::regression(raw.columns.front(), std::move(design), p);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileNotFound("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

void write_draws_csv(const fs::path& path, const std::vector<Chain>& chains) {
  std::string s = "chain,iter";
  const Eigen::Index d = chains.empty() ? 0 : chains.front().draws.cols();
  for (Eigen::Index i = 0; i < d; ++i) s += ",theta_" + std::to_string(i);
  s += ",log_kernel\n";
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    for (Eigen::Index r = 0; r < ch.draws.rows(); ++r) {
      s += std::to_string(c);
      s += ',';
      s += std::to_string(r);
      for (Eigen::Index i = 0; i < d; ++i) {
        s += ',';
        s += format_double(ch.draws(r, i));
      }
      s += ',';
      s += format_double(ch.log_density[r]);
      s += '\n';
    }
  }
  write_file_atomic(path, s);
}

std::vector<Chain> read_draws_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "", "missing header row");
  const auto header = split_fields(line, ',');
  if (header.size() < 3 || header[0] != "chain" || header[1] != "iter" || header.back() != "log_kernel")
    throw ParseError(0, "", "not a draws file");
  const std::size_t d = header.size() - 3;
  std::vector<std::vector<std::vector<double>>> rows;  // chain -> row -> values
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto f = split_fields(line, ',');
    if (f.size() != header.size()) throw ParseError(row, "", "wrong field count");
    std::vector<double> v(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
      const auto res = std::from_chars(f[j].data(), f[j].data() + f[j].size(), v[j]);
      if (res.ec != std::errc()) throw ParseError(row, header[j], "non-numeric cell '" + f[j] + "'");
    }
    const auto c = static_cast<std::size_t>(v[0]);
    if (rows.size() <= c) rows.resize(c + 1);
    rows[c].push_back(std::vector<double>(v.begin() + 2, v.end()));
  }
  std::vector<Chain> chains(rows.size());
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto n = static_cast<Eigen::Index>(rows[c].size());
    chains[c].draws.resize(n, static_cast<Eigen::Index>(d));
    chains[c].log_density.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& v = rows[c][static_cast<std::size_t>(r)];
      for (std::size_t i = 0; i < d; ++i) chains[c].draws(r, static_cast<Eigen::Index>(i)) = v[i];
      chains[c].log_density[r] = v[d];
    }
  }
  return chains;
}

namespace {

using Lines = std::vector<std::pair<std::string, std::string>>;

std::string render(const Lines& lines) {
  std::string s;
  for (const auto& [k, v] : lines) s += k + " = " + v + "\n";
  return s;
}

void add_summary(Lines& lines, const PosteriorSummary& s, const std::vector<std::string>& names,
                 const std::string& prefix = "") {
  lines.emplace_back(prefix + "draws", std::to_string(s.draws));
  lines.emplace_back(prefix + "alpha", format_double(s.alpha));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const std::string key = prefix + names[i] + ".";
    lines.emplace_back(key + "map", format_double(s.map[ii]));
    lines.emplace_back(key + "mean", format_double(s.mean[ii]));
    lines.emplace_back(key + "sd", format_double(s.sd[ii]));
    lines.emplace_back(key + "ci_low", format_double(s.credible_intervals[i].lower));
    lines.emplace_back(key + "ci_high", format_double(s.credible_intervals[i].upper));
    lines.emplace_back(key + "ess", format_double(s.ess[ii]));
    lines.emplace_back(key + "rhat", format_double(s.rhat[ii]));
  }
}

void add_chain_stats(Lines& lines, const std::vector<Chain>& chains, const std::string& prefix = "") {
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string key = prefix + "chain_" + std::to_string(c) + ".";
    lines.emplace_back(key + "acceptance_rate", format_double(chains[c].acceptance_rate));
    lines.emplace_back(key + "divergences", std::to_string(chains[c].divergences));
    if (chains[c].low_acceptance) {
      lines.emplace_back(key + "warning", "all_rejected");
      std::cerr << "warning: chain " << c << " accepted under 1% of proposals\n";
    }
  }
}

void write_histograms(const fs::path& dir, const std::vector<Chain>& chains,
                      const std::vector<std::string>& names, int bins = 50) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t total = 0;
    for (const auto& c : chains) {
      lo = std::min(lo, c.draws.col(ii).minCoeff());
      hi = std::max(hi, c.draws.col(ii).maxCoeff());
      total += static_cast<std::size_t>(c.draws.rows());
    }
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& c : chains)
      for (Eigen::Index r = 0; r < c.draws.rows(); ++r) {
        auto b = static_cast<int>((c.draws(r, ii) - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++counts[static_cast<std::size_t>(b)];
      }
    std::string s = "bin_left,bin_right,density\n";
    for (int b = 0; b < bins; ++b) {
      const double left = lo + b * width;
      s += format_double(left) + "," + format_double(b + 1 == bins ? hi : left + width) + "," +
           format_double(static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                         (static_cast<double>(total) * width)) +
           "\n";
    }
    write_file_atomic(dir / ("hist_" + names[i] + ".csv"), s);
  }
}

std::vector<std::string> theta_names(Eigen::Index d) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i) names.push_back("theta_" + std::to_string(i));
  return names;
}

double arg(const RunConfig& cfg, const std::string& key, double fallback) {
  const auto it = cfg.model_args.find(key);
  return it == cfg.model_args.end() ? fallback : it->second;
}

int default_k(std::size_t N) {
  const auto k = static_cast<int>(std::sqrt(static_cast<double>(N)));
  return std::clamp(k, 1, static_cast<int>(N / 2));
}

ScaleSchedule schedule_for(const RunConfig& cfg, const LikelihoodFamily& family,
                           const Vector& theta_prime, const Dataset& data,
                           const BlockPartition& part) {
  if (cfg.delta_c) {
    ScaleSchedule s;
    s.c = *cfg.delta_c;
    s.exponent = cfg.delta_exponent;
    return s;
  }
  return calibrate_schedule(family, theta_prime, data, part, cfg.delta_exponent);
}

RhoSpec rho_spec(const std::string& name) {
  RhoSpec spec;
  spec.kind = parse_rho_kind(name);
  return spec;
}

Dataset maybe_contaminate(const RunConfig& cfg, const Dataset& data) {
  if (cfg.outliers == 0) return data;
  const std::uint64_t seed = chain_seed(cfg.seed, 1);
  const auto spec = cfg.outlier_sd > 0.0
                        ? ContaminationSpec::gaussian(cfg.outliers, cfg.outlier_value, cfg.outlier_sd, seed)
                        : ContaminationSpec::point_mass(cfg.outliers, cfg.outlier_value, seed);
  return contaminate(data, spec);
}

/// Scalar families: box around the MLE and blockwise pilot, theta' below the pilot.
RobustPosterior scalar_posterior(const RunConfig& cfg, const Dataset& data) {
  const FamilyKind kind = parse_family_kind(cfg.model);
  constexpr double kWide = 1e12;
  const Box wide_box(Vector::Constant(1, kind == FamilyKind::poisson_rate ? 1e-12 : -kWide),
                     Vector::Constant(1, kWide));
  LikelihoodFamily family = [&] {
    switch (kind) {
      case FamilyKind::gaussian_location:
        return LikelihoodFamily::gaussian_location(arg(cfg, "sigma", 1.0), wide_box);
      case FamilyKind::laplace_location:
        return LikelihoodFamily::laplace_location(arg(cfg, "scale", 1.0), wide_box);
      case FamilyKind::poisson_rate:
        return LikelihoodFamily::poisson_rate(wide_box);
      default:
        throw ConfigError("model '" + cfg.model + "' needs feature columns");
    }
  }();
  BlockPartition part = partition_blocks(data.size(), cfg.k.value_or(default_k(data.size())),
                                         parse_partition_scheme(cfg.partition), chain_seed(cfg.seed, 2));
  const double mle = closed_form_mle(family, data)[0];
  const double pilot = blockwise_median_mle(family, data, part)[0];
  const double spread =
      kind == FamilyKind::poisson_rate ? std::sqrt(std::max(pilot, 1e-3)) : family.fixed_scale();
  double lower = arg(cfg, "lower", std::min(mle, pilot) - 50.0 * spread);
  const double upper = arg(cfg, "upper", std::max(mle, pilot) + 50.0 * spread);
  if (kind == FamilyKind::poisson_rate) lower = std::max(lower, 1e-6 * std::max(1.0, upper));
  const Box box(Vector::Constant(1, lower), Vector::Constant(1, upper));
  family = family.with_domain(box);

  double tp = arg(cfg, "theta-prime", pilot - 5.0 * spread);
  if (!(tp > lower && tp < upper)) tp = 0.5 * (lower + std::clamp(pilot, lower, upper));
  const Vector theta_prime = Vector::Constant(1, tp);

  Prior prior = cfg.prior == "gaussian"
                    ? Prior::gaussian_diagonal(box, Vector::Constant(1, arg(cfg, "prior-mean", pilot)),
                                               Vector::Constant(1, arg(cfg, "prior-sd", 10.0 * spread)))
                    : Prior::uniform_box(box);
  if (cfg.prior != "gaussian" && cfg.prior != "uniform")
    throw ConfigError("prior must be 'uniform' or 'gaussian'");
  const ScaleSchedule schedule = schedule_for(cfg, family, theta_prime, data, part);
  return RobustPosterior(family, std::move(prior), ReferencePoint(theta_prime, box), data,
                         std::move(part), Rho(rho_spec(cfg.rho)), schedule);
}

RegressionSetup regression_setup(const RunConfig& cfg, std::size_t N, int default_blocks) {
  RegressionSetup s;
  s.k = cfg.k.value_or(default_blocks > 0 ? default_blocks : default_k(N));
  s.rho = rho_spec(cfg.rho);
  s.scheme = parse_partition_scheme(cfg.partition);
  s.beta_bound = arg(cfg, "beta-bound", s.beta_bound);
  s.beta_prior_sd = arg(cfg, "prior-sd", s.beta_prior_sd);
  s.sigma_lower = arg(cfg, "sigma-lower", s.sigma_lower);
  s.sigma_upper = arg(cfg, "sigma-upper", s.sigma_upper);
  s.delta_c = cfg.delta_c;
  s.delta_exponent = cfg.delta_exponent;
  s.seed = cfg.seed;
  return s;
}

struct Fit {
  std::vector<Chain> chains;
  PosteriorSummary summary;
};

Fit fit_posterior(const RunConfig& cfg, const RobustPosterior& post, bool refine) {
  SamplerConfig sc = cfg.sampler;
  sc.seed = cfg.seed;
  const MapResult map = map_estimate(post, std::max(1, cfg.restarts), cfg.seed);
  if (!map.improved) std::cerr << "warning: MAP search did not improve on any start\n";
  Fit f;
  f.chains = sample(post, sc, map.theta, laplace_scales(post, map.theta));
  f.summary = summarize(f.chains, cfg.alpha, refine ? &post : nullptr);
  if (refine && map.log_density > f.summary.map_log_density) {
    f.summary.map = map.theta;
    f.summary.map_log_density = map.log_density;
  }
  return f;
}

Lines posterior_lines(const RobustPosterior& post) {
  Lines l;
  l.emplace_back("rho", std::string(to_string(post.rho().kind())));
  l.emplace_back("k", std::to_string(post.partition().k));
  l.emplace_back("n", std::to_string(post.partition().n));
  l.emplace_back("delta_c", format_double(post.schedule().c));
  l.emplace_back("delta_exponent", format_double(post.schedule().exponent));
  l.emplace_back("delta_n", format_double(post.schedule().delta(post.partition().n)));
  for (Eigen::Index i = 0; i < post.theta_prime().size(); ++i)
    l.emplace_back("theta_prime_" + std::to_string(i), format_double(post.theta_prime()[i]));
  return l;
}

void write_fit(const fs::path& dir, const Fit& f, const std::vector<std::string>& names, Lines lines,
               bool hists = true) {
  write_draws_csv(dir / "draws.csv", f.chains);
  add_summary(lines, f.summary, names);
  add_chain_stats(lines, f.chains);
  if (hists) write_histograms(dir, f.chains, names);
  write_file_atomic(dir / "summary.txt", render(lines));
}

int cmd_fit(const RunConfig& cfg, bool full) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
  const bool regression = parse_family_kind(cfg.model) == FamilyKind::linear_regression;
  if (regression && cfg.features.empty()) throw ConfigError("linear-regression needs --features");
  RawData raw = load_csv(cfg.data, cfg.response, regression ? cfg.features : std::vector<std::string>{});
  std::cerr << "loaded " << raw.rows() << " rows; columns:";
  for (const auto& n : raw.names) std::cerr << ' ' << n;
  std::cerr << '\n';
  Lines lines{{"command", full ? "fit" : "sample"}, {"model", cfg.model}, {"rows", std::to_string(raw.rows())}};
  std::vector<std::string> names;
  if (regression) {
    if (cfg.standardize) {
      Transform t;
      raw = standardize(raw, &t);
      for (std::size_t j = 0; j < t.names.size(); ++j) {
        lines.emplace_back("transform." + t.names[j] + ".mean", format_double(t.mean[j]));
        lines.emplace_back("transform." + t.names[j] + ".sd", format_double(t.sd[j]));
      }
    }
    names.push_back("intercept");
    names.insert(names.end(), raw.names.begin() + 1, raw.names.end());
    names.push_back("sigma");
  }
  const Dataset data = maybe_contaminate(cfg, to_dataset(raw));
  const RobustPosterior post = regression
                                   ? regression_posterior(regression_setup(cfg, data.size(), 0), data)
                                   : scalar_posterior(cfg, data);
  if (!regression) names = theta_names(post.dim());
  const Lines pl = posterior_lines(post);
  lines.insert(lines.end(), pl.begin(), pl.end());
  const Fit f = fit_posterior(cfg, post, full);
  write_fit(cfg.out, f, names, lines, full);
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  const FamilyKind kind = parse_family_kind(cfg.model);
  if (kind == FamilyKind::linear_regression) throw ConfigError("simulate supports scalar models only");
  const auto n = static_cast<std::size_t>(arg(cfg, "n", 1000));
  const double theta = arg(cfg, "theta", kind == FamilyKind::poisson_rate ? 1.0 : 0.0);
  const Box box(Vector::Constant(1, theta - 1.0), Vector::Constant(1, theta + 1.0));
  const auto family = kind == FamilyKind::gaussian_location
                          ? LikelihoodFamily::gaussian_location(arg(cfg, "sigma", 1.0), box)
                      : kind == FamilyKind::laplace_location
                          ? LikelihoodFamily::laplace_location(arg(cfg, "scale", 1.0), box)
                          : LikelihoodFamily::poisson_rate(Box(Vector::Constant(1, theta * 0.5),
                                                               Vector::Constant(1, theta * 2.0)));
  std::mt19937_64 rng(chain_seed(cfg.seed, 0));
  std::vector<double> x(n);
  for (double& v : x) v = family.simulate(Vector::Constant(1, theta), rng);
  const Dataset data = maybe_contaminate(cfg, Dataset::scalars(std::move(x)));
  std::string s = "x\n";
  for (double v : data.values()) s += format_double(v) + "\n";
  write_file_atomic(fs::path(cfg.out) / "data.csv", s);
  return 0;
}

LocationSetup location_setup(const RunConfig& cfg, RhoKind default_rho, int default_blocks) {
  LocationSetup s;
  s.N = static_cast<std::size_t>(arg(cfg, "n", 1000));
  s.theta0 = arg(cfg, "theta", s.theta0);
  s.prior_mean = arg(cfg, "prior-mean", s.prior_mean);
  s.prior_sd = arg(cfg, "prior-sd", s.prior_sd);
  s.rho.kind = cfg.rho_given ? parse_rho_kind(cfg.rho) : default_rho;
  s.k = cfg.k.value_or(default_blocks);
  s.scheme = parse_partition_scheme(cfg.partition);
  s.delta_c = cfg.delta_c;
  s.delta_exponent = cfg.delta_exponent;
  s.seed = cfg.seed;
  return s;
}

Lines location_fit(const RunConfig& cfg, const LocationSetup& s, const fs::path& dir) {
  const Dataset data = simulate_location(s);
  const RobustPosterior post = location_posterior(s, data);
  const Fit f = fit_posterior(cfg, post, true);
  const MapResult tilde = map_estimate(location_posterior(s, data, true), 1, cfg.seed);
  const BvmReport bvm = bvm_diagnostic(
      f.chains, tilde.theta, plugin_covariance(post.family(), tilde.theta, post.effective_size()));
  const ConjugateNormal standard = location_standard_posterior(s, data);
  Lines lines = posterior_lines(post);
  lines.emplace_back("outliers", std::to_string(s.outliers));
  lines.emplace_back("theta_tilde", format_double(tilde.theta[0]));
  lines.emplace_back("bvm_ks", format_double(bvm.ks_statistic[0]));
  lines.emplace_back("standard.mean", format_double(standard.mean));
  lines.emplace_back("standard.sd", format_double(standard.sd));
  write_fit(dir, f, {"theta_0"}, lines);
  Lines top{{"mean", format_double(f.summary.mean[0])},
            {"map", format_double(f.summary.map[0])},
            {"bvm_ks", format_double(bvm.ks_statistic[0])},
            {"standard.mean", format_double(standard.mean)}};
  return top;
}

int cmd_experiment(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  Lines summary{{"experiment", cfg.experiment}, {"seed", std::to_string(cfg.seed)}};
  auto merge = [&](const std::string& prefix, const Lines& l) {
    for (const auto& [k, v] : l) summary.emplace_back(prefix + k, v);
  };

  if (cfg.experiment == "example1") {
    const std::vector<int> ks = cfg.k ? std::vector<int>{*cfg.k} : std::vector<int>{20, 40, 60, 80};
    for (int k : ks) {
      RunConfig c = cfg;
      c.k = k;
      const LocationSetup s = location_setup(c, RhoKind::absolute, k);
      merge("k" + std::to_string(k) + ".", location_fit(c, s, out / ("k" + std::to_string(k))));
    }
  } else if (cfg.experiment == "example2") {
    for (const bool dirty : {false, true}) {
      LocationSetup s = location_setup(cfg, RhoKind::huber, 100);
      s.outliers = dirty ? 40 : 0;
      const std::string name = dirty ? "outliers" : "clean";
      merge(name + ".", location_fit(cfg, s, out / name));
    }
  } else if (cfg.experiment == "wine") {
    if (cfg.data.empty()) throw ConfigError("the wine experiment needs --data");
    RawData raw = load_csv(cfg.data, cfg.response.empty() ? "quality" : cfg.response, wine_regressors());
    Transform t;
    raw = standardize(raw, &t);
    const Dataset data = maybe_contaminate(cfg, to_dataset(raw));
    RunConfig c = cfg;
    c.prior = "gaussian";
    const RobustPosterior post = regression_posterior(regression_setup(c, data.size(), 31), data);
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), wine_regressors().begin(), wine_regressors().end());
    names.push_back("sigma");
    Lines lines = posterior_lines(post);
    lines.emplace_back("rows", std::to_string(data.size()));
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      lines.emplace_back("transform." + t.names[j] + ".mean", format_double(t.mean[j]));
      lines.emplace_back("transform." + t.names[j] + ".sd", format_double(t.sd[j]));
    }
    const Fit f = fit_posterior(cfg, post, true);
    write_fit(out, f, names, lines);
    return 0;
  } else if (cfg.experiment == "deviation") {
    const Box box(Vector::Constant(1, -10.0), Vector::Constant(1, 10.0));
    const auto family = LikelihoodFamily::gaussian_location(1.0, box);
    DeviationConfig d{.family = family, .theta0 = Vector::Zero(1), .theta = Vector::Ones(1),
                      .theta_prime = Vector::Zero(1)};
    d.N = static_cast<std::size_t>(arg(cfg, "n", 200));
    d.k = cfg.k.value_or(100);
    d.rho = rho_spec(cfg.rho);
    d.schedule.c = cfg.delta_c.value_or(1.0);
    d.schedule.exponent = cfg.delta_exponent;
    d.scheme = parse_partition_scheme(cfg.partition);
    d.replications = cfg.replications > 0 ? cfg.replications : 500;
    d.seed = cfg.seed;
    d.threads = cfg.sampler.threads;
    const DeviationTable clean = deviation_harness(d);
    d.contamination = ContaminationSpec::point_mass(cfg.outliers > 0 ? cfg.outliers : d.N / 20,
                                                    cfg.outliers > 0 ? cfg.outlier_value : 1e6, 0);
    const DeviationTable dirty = deviation_harness(d);
    std::string csv = "replication,scenario,mom_error,mean_error\n";
    for (const auto* t : {&clean, &dirty})
      for (const auto& r : t->rows)
        csv += std::to_string(r.replication) + (t == &clean ? ",clean," : ",contaminated,") +
               format_double(r.mom_error) + "," + format_double(r.mean_error) + "\n";
    write_file_atomic(out / "deviation.csv", csv);
    summary.emplace_back("clean.mom_rmse", format_double(clean.mom_rmse()));
    summary.emplace_back("clean.mean_rmse", format_double(clean.mean_rmse()));
    summary.emplace_back("contaminated.mom_rmse", format_double(dirty.mom_rmse()));
    summary.emplace_back("contaminated.mean_rmse", format_double(dirty.mean_rmse()));
    summary.emplace_back("mom_inflation", format_double(dirty.mom_rmse() / clean.mom_rmse()));
    summary.emplace_back("mean_inflation", format_double(dirty.mean_rmse() / clean.mean_rmse()));
  } else if (cfg.experiment == "normality") {
    const double theta0 = arg(cfg, "theta", 0.0);
    const Box box(Vector::Constant(1, theta0 - 10.0), Vector::Constant(1, theta0 + 10.0));
    const auto family = LikelihoodFamily::gaussian_location(1.0, box);
    NormalityConfig n{.family = family, .theta0 = Vector::Constant(1, theta0),
                      .reference_offset = Vector::Ones(1)};
    n.N = static_cast<std::size_t>(arg(cfg, "n", 2000));
    n.k = cfg.k.value_or(40);
    n.rho = rho_spec(cfg.rho);
    if (cfg.delta_c) {
      ScaleSchedule s;
      s.c = *cfg.delta_c;
      s.exponent = cfg.delta_exponent;
      n.schedule = s;
    }
    n.scheme = parse_partition_scheme(cfg.partition);
    n.replications = cfg.replications > 0 ? cfg.replications : 300;
    n.seed = cfg.seed;
    n.threads = cfg.sampler.threads;
    const NormalityTable t = normality_harness(n);
    std::string csv = "replication,error\n";
    for (std::size_t r = 0; r < t.errors.size(); ++r)
      csv += std::to_string(r) + "," + format_double(t.errors[r][0]) + "\n";
    write_file_atomic(out / "normality.csv", csv);
    summary.emplace_back("variance", format_double(t.variance()));
    summary.emplace_back("ks", format_double(t.ks(Matrix::Identity(1, 1))));
  } else {
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  }
  write_file_atomic(out / "summary.txt", render(summary));
  return 0;
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    if (cfg.command == "fit") return cmd_fit(cfg, true);
    if (cfg.command == "sample") return cmd_fit(cfg, false);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "experiment") return cmd_experiment(cfg);
    throw ConfigError("unknown command '" + cfg.command + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mombayes::app
