// Batch driver: every subcommand writes CSV tables and a manifest into the
// output directory. Exit codes: 0 success, 1 failed check, 2 bad configuration.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slkato/slkato.hpp"

namespace fs = std::filesystem;
using namespace slkato;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

// Option name -> help text. Config-file keys use the same names with '_' or '-'.
const std::vector<std::pair<std::string, std::string>> kOptions = {
    {"problem", "named family, 'lions', 'battery', or 'custom' with coefficient CSVs"},
    {"interval", "finite | half_line | full_line"},
    {"a", "left end (finite, half_line)"},
    {"b", "right end (finite)"},
    {"radius", "truncation radius (half_line, full_line)"},
    {"left", "theta at the left end: dirichlet, neumann, pi/4, 1+0.5i"},
    {"right", "theta at the right end"},
    {"n", "number of cells"},
    {"n-list", "comma-separated refinement levels"},
    {"E", "spectral shift (<= 0 picks a safe shift)"},
    {"E-grid", "geometric grid 'start,factor,count'"},
    {"alpha", "fractional exponent"},
    {"z", "complex spectral parameter"},
    {"shift", "z grid offset for the resolvent identity"},
    {"quad-nodes", "Gauss nodes per panel"},
    {"samples", "random vectors per check"},
    {"threshold", "growth ceiling for the bounded verdict"},
    {"integral-nodes", "nodes for the lambda integral of the decay check"},
    {"seed", "random seed"},
    {"p-csv", "coefficient table x,re,im for p"},
    {"q-csv", "coefficient table x,re,im for q"},
    {"r-csv", "coefficient table x,re,im for r"},
    {"s-csv", "coefficient table x,re,im for s"},
};

std::string canonical(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

/// Merged settings: config file first, command-line flags override.
class Settings {
 public:
  explicit Settings(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& k) const { return kv_.count(k) > 0; }
  std::string str(const std::string& k, const std::string& fallback) const { return has(k) ? kv_.at(k) : fallback; }
  double num(const std::string& k, double fallback) const { return has(k) ? parse_double(kv_.at(k), k) : fallback; }
  int integer(const std::string& k, int fallback) const { return has(k) ? parse_int(kv_.at(k), k) : fallback; }
  std::uint64_t seed() const {
    const int s = integer("seed", 1);
    if (s < 0) throw ConfigError("seed must be nonnegative");
    return static_cast<std::uint64_t>(s);
  }
  std::vector<int> n_list(const std::vector<int>& fallback) const {
    if (!has("n-list")) return fallback;
    std::vector<int> out;
    for (const auto& t : split_list(kv_.at("n-list"))) out.push_back(parse_int(t, "n-list"));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] < 2) throw ConfigError("n-list entries must be >= 2");
      if (i > 0 && out[i] <= out[i - 1]) throw ConfigError("n-list must be increasing");
    }
    if (out.size() < 2) throw ConfigError("n-list needs at least two levels");
    return out;
  }
  std::vector<double> E_grid(const std::vector<double>& fallback) const {
    if (!has("E-grid")) return fallback;
    const auto parts = split_list(kv_.at("E-grid"));
    if (parts.size() != 3) throw ConfigError("E-grid must be 'start,factor,count'");
    const double start = parse_double(parts[0], "E-grid start"), factor = parse_double(parts[1], "E-grid factor");
    const int count = parse_int(parts[2], "E-grid count");
    if (!(start > 0.0) || !(factor > 1.0) || count < 2) throw ConfigError("E-grid needs start > 0, factor > 1, count >= 2");
    return geometric_grid(start, factor, count);
  }
  int cells(int fallback) const {
    const int n = integer("n", fallback);
    if (n < 2) throw ConfigError("n must be >= 2");
    return n;
  }
  QuadratureSpec quad() const {
    QuadratureSpec q;
    q.nodes_per_panel = integer("quad-nodes", q.nodes_per_panel);
    try {
      q.validate();
    } catch (const PreconditionError& e) {
      throw ConfigError(e.what());
    }
    return q;
  }
  const std::map<std::string, std::string>& all() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

IntervalSpec interval_of(const Settings& s) {
  const std::string kind = s.str("interval", "finite");
  IntervalSpec iv;
  if (kind == "finite") {
    iv = IntervalSpec::finite(s.num("a", 0.0), s.num("b", 1.0));
  } else if (kind == "half_line") {
    iv = IntervalSpec::half_line(s.num("a", 0.0), s.num("radius", 20.0));
  } else if (kind == "full_line") {
    iv = IntervalSpec::full_line(s.num("radius", 20.0));
  } else {
    throw ConfigError("unknown interval kind '" + kind + "'");
  }
  try {
    iv.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  return iv;
}

ProblemSpec problem_of(const Settings& s, const std::string& default_family = "constant") {
  const std::string name = s.str("problem", default_family);
  ProblemSpec p;
  p.interval = interval_of(s);
  p.left = parse_theta(s.str("left", "dirichlet"));
  p.right = parse_theta(s.str("right", "dirichlet"));
  try {
    p.left.validate();
    p.right.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  p.name = name;
  if (name == "custom") {
    CoefficientFunctions f;
    f.name = "custom";
    if (s.has("p-csv")) f.p = coefficient_from_table(read_csv(s.str("p-csv", "")));
    if (s.has("q-csv")) f.q = coefficient_from_table(read_csv(s.str("q-csv", "")));
    if (s.has("r-csv")) f.r = coefficient_from_table(read_csv(s.str("r-csv", "")));
    if (s.has("s-csv")) f.s = coefficient_from_table(read_csv(s.str("s-csv", "")));
    p.coeffs = f;
  } else {
    p.coeffs = named_family(name, 0.5 * (p.interval.left() + p.interval.right()) + 0.1);
  }
  return p;
}

/// Validates sampled coefficients before any heavy computation.
void validate_problem(const ProblemSpec& p, int n) {
  try {
    sample_coefficients(p.mesh(n), p.coeffs).validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("problem '") + p.name + "': " + e.what());
  }
}

struct Output {
  fs::path dir;
  Manifest manifest;
  std::vector<std::string> checks;
  bool passed = true;

  void table(const std::string& stem, const CsvTable& t) { write_csv(dir / (stem + ".csv"), t); }
  void suite(const SuiteResult& r) {
    checks.push_back(r.check);
    r.record(manifest);
    for (const auto& [stem, t] : r.tables) table(stem, t);
    for (const auto& f : r.failures) std::cerr << "FAIL " << r.check << ": " << f << '\n';
    passed = passed && r.passed;
  }
};

// ---------------------------------------------------------------------------
// Subcommands

void run_assemble(const Settings& s, Output& out) {
  const ProblemSpec p = problem_of(s);
  const int n = s.cells(64);
  validate_problem(p, n);
  const Mesh mesh = p.mesh(n);
  const auto forms = assemble_forms(mesh, sample_coefficients(mesh, p.coeffs), p.left, p.right);
  const auto op = orthonormalize(forms);
  CsvTable nodes{{"i", "x", "dof"}, {}};
  for (int i = 0; i < mesh.n_nodes(); ++i) nodes.add(i, mesh.nodes[static_cast<std::size_t>(i)], forms.dofs.node_to_dof[static_cast<std::size_t>(i)]);
  out.table("mesh", nodes);
  out.table("K0", matrix_table(forms.K0));
  out.table("K1", matrix_table(forms.K1));
  out.table("K2", matrix_table(forms.K2));
  out.table("K3", matrix_table(forms.K3));
  out.table("boundary", matrix_table(forms.Bdry));
  out.table("mass", matrix_table(MatC(forms.mass_lumped.cast<cplx>().asDiagonal())));
  out.table("operator", matrix_table(op.H));
  out.checks.push_back("assembly");
  out.manifest.set("assembly.n_dof", forms.n_dof());
  out.manifest.set("assembly.coefficient_hash", std::to_string(forms.coefficient_hash));
  out.manifest.set("assembly.hermitian", is_hermitian(op.H));
}

void run_verify_kato(const Settings& s, Output& out) {
  KatoSuiteOptions opt;
  opt.n = s.cells(opt.n);
  opt.shift = s.num("shift", opt.shift);
  if (!(opt.shift > 0.0)) throw ConfigError("shift must be positive");
  std::vector<ProblemSpec> problems;
  if (s.str("problem", "constant") == "battery") {
    problems = kato_battery();
  } else {
    problems.push_back(problem_of(s));
    validate_problem(problems.back(), opt.n);
  }
  const auto [one, two] = kato_suite(problems, opt);
  out.suite(one);
  out.suite(two);
}

void run_verify_krein(const Settings& s, Output& out) {
  KreinSuiteOptions opt;
  opt.n_list = s.n_list(opt.n_list);
  opt.kernel_E = s.num("E", opt.kernel_E);
  opt.quad = s.quad();
  if (s.has("left")) opt.thetas = {parse_theta(s.str("left", ""))};
  for (const auto& th : opt.thetas)
    if (th.is_dirichlet()) throw ConfigError("verify-krein needs a non-Dirichlet left end");
  out.suite(krein_suite(opt));
}

void run_kappa_study(const Settings& s, Output& out) {
  const double alpha = s.num("alpha", 0.5);
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const double threshold = s.num("threshold", kDefaultGrowthThreshold);
  if (!(threshold >= 1.0)) throw ConfigError("threshold must be >= 1");
  const auto n_list = s.n_list({32, 64, 128, 256, 512});
  const int samples = s.integer("samples", 16);
  DomainProblem dp;
  if (s.str("problem", "constant") == "lions") {
    dp = lions_problem(s.num("radius", 1.0));
  } else {
    const ProblemSpec p = problem_of(s);
    validate_problem(p, n_list.front());
    dp = operator_problem(p);
  }
  const auto rep = refinement_study(dp, n_list, s.num("E", dp.adjoint_pair ? 1.0 : 0.0), alpha, threshold, samples,
                                    s.seed());
  out.table("kappa", kappa_csv(rep));
  CsvTable samp{{"n", "sampled_min", "sampled_max"}, {}};
  for (const auto& row : rep.rows) samp.add(row.n, row.sampled_min, row.sampled_max);
  out.table("kappa_samples", samp);
  out.checks.push_back("domain_refinement");
  out.manifest.set("domain_refinement.problem", rep.problem);
  out.manifest.set("domain_refinement.E", rep.E);
  out.manifest.set("domain_refinement.growth", rep.growth);
  out.manifest.set("domain_refinement.threshold", rep.threshold);
  out.manifest.set("domain_refinement.verdict", rep.verdict);
}

void run_decay_study(const Settings& s, Output& out) {
  DecaySuiteOptions opt;
  opt.n = s.cells(opt.n);
  opt.integral_nodes = s.integer("integral-nodes", opt.integral_nodes);
  if (opt.integral_nodes < 0) throw ConfigError("integral-nodes must be >= 0");
  const auto grid = s.E_grid({});
  if (!grid.empty()) {
    opt.E_lo = grid.front();
    opt.E_hi = grid.back();
    opt.per_decade = std::max(1, static_cast<int>(std::lround((grid.size() - 1) / std::log10(grid.back() / grid.front()))));
  }
  ProblemSpec p = decay_default_problem();
  if (s.has("problem")) p = problem_of(s);
  validate_problem(p, opt.n);
  out.suite(decay_suite(p, opt));
}

void run_kernel_dump(const Settings& s, Output& out) {
  const ProblemSpec p = problem_of(s, "laplace");
  if (p.interval.kind != IntervalKind::finite) throw ConfigError("kernel-dump needs a finite interval");
  const int n = s.cells(40);
  const Mesh mesh = p.mesh(n);
  const cplx z = parse_complex(s.str("z", "-5"));
  out.table("green_kernel", kernel_csv(green_table(z, p.left, mesh)));
  out.checks.push_back("green_kernel");
  if (!p.left.is_dirichlet()) {
    const double E = s.num("E", std::max(25.0, krein_safe_shift(p.left, mesh.left(), mesh.right())));
    out.table("sqrt_kernel", kernel_csv(sqrt_kernel(E, p.left, mesh, s.quad())));
    CsvTable prof{{"E", "lhs", "rhs"}, {}};
    const double x = mesh.left() + 0.3 * p.interval.length(), xp = mesh.left() + 0.6 * p.interval.length();
    for (double e : log_grid(E, 1e3 * E, 4)) {
      const auto b = bessel_bound_check(e, x, xp, p.left, mesh.left(), mesh.right(), s.quad());
      prof.add(e, b.lhs, b.rhs);
    }
    out.table("bessel_profile", prof);
    out.checks.push_back("sqrt_kernel");
    out.manifest.set("sqrt_kernel.E", E);
  }
  out.manifest.set("green_kernel.z", z);
}

void run_hypothesis_check(const Settings& s, Output& out) {
  HypothesisSuiteOptions opt;
  opt.n = s.cells(opt.n);
  opt.vectors = s.integer("samples", opt.vectors);
  opt.seed = s.seed();
  opt.E_grid = s.E_grid(opt.E_grid);
  opt.integral_nodes = s.integer("integral-nodes", opt.integral_nodes);
  const ProblemSpec p = problem_of(s);
  validate_problem(p, opt.n);
  out.suite(hypothesis_suite(p, opt));
}

void run_trace_check(const Settings& s, Output& out) {
  TraceSuiteOptions opt;
  if (s.has("seed")) opt.seeds = {s.seed()};
  out.suite(trace_suite(opt));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete checks for Sturm-Liouville resolvent factorizations"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = "out";
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  std::map<std::string, std::string> flags;
  for (const auto& [name, help] : kOptions) app.add_option("--" + name, flags[name], help);

  using Runner = void (*)(const Settings&, Output&);
  const std::vector<std::tuple<std::string, std::string, Runner>> commands = {
      {"assemble", "dump form matrices and the operator", run_assemble},
      {"verify-kato", "factored resolvent identity, one shot and two-step", run_verify_kato},
      {"verify-krein", "Krein formula, square-root kernel, Bessel bound", run_verify_krein},
      {"kappa-study", "square-root domain norm equivalence under refinement", run_kappa_study},
      {"decay-study", "decay of K(-E) and of a multiplier", run_decay_study},
      {"kernel-dump", "Green and square-root kernels", run_kernel_dump},
      {"hypothesis-check", "sector, accretivity, form bounds, admissibility", run_hypothesis_check},
      {"trace-check", "trace formula for the symmetrized determinant", run_trace_check},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) subs[name] = app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::string command;
  Runner runner = nullptr;
  for (const auto& [name, help, fn] : commands)
    if (subs[name]->parsed()) {
      command = name;
      runner = fn;
    }

  Output out;
  try {
    std::map<std::string, std::string> merged;
    if (!config_path.empty())
      for (const auto& [k, v] : read_key_values(config_path)) {
        const std::string key = canonical(k);
        if (key == "out") {
          if (app.count("--out") == 0) out_dir = v;
          continue;
        }
        if (!flags.count(key)) throw ConfigError("unknown configuration key '" + k + "'");
        merged[key] = v;
      }
    for (const auto& [name, help] : kOptions)
      if (app.count("--" + name) > 0) merged[name] = flags[name];
    const Settings settings(merged);

    out.dir = out_dir;
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());

    out.manifest.set("command", command);
    for (const auto& [k, v] : settings.all()) out.manifest.set("config." + k, v);
    out.manifest.set("seed", static_cast<long long>(settings.seed()));
    out.manifest.set("growth_threshold", settings.num("threshold", kDefaultGrowthThreshold));
    runner(settings, out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "check aborted: " << e.what() << '\n';
    out.passed = false;
    out.manifest.set("error", std::string(e.what()));
  }

  std::string joined;
  for (const auto& c : out.checks) joined += (joined.empty() ? "" : ",") + c;
  out.manifest.set("checks", joined);
  out.manifest.set("passed", out.passed);
  const int code = out.passed ? kExitOk : kExitCheckFailed;
  out.manifest.set("exit_code", code);
  try {
    out.manifest.write(out.dir / "manifest.txt");
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
  }
  std::cout << command << ": " << (out.passed ? "ok" : "FAILED") << " (" << out.dir.string() << ")\n";
  return code;
}
