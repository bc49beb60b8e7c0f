#ifndef ALLPASS_CLI_HPP
#define ALLPASS_CLI_HPP

// Problem files, result envelopes and the five commands behind the
// `allpass` executable. Requires nlohmann/json (json.hpp) on the include
// path.
//
// A problem file is a JSON object with optional fields A, B, C, D, P, Q,
// delta (matrices as arrays of rows), subspace (basis vectors as columns)
// and tol. Empty matrices may be written as [] and get their shape from
// the other fields.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "allpass/deflate.hpp"
#include "allpass/factor.hpp"

namespace allpass::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kMath = 1, kInput = 2 };

/// Unreadable file, malformed JSON or inconsistent shapes.
class InputError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Serialization

/// Rows of shortest round-trip decimals; load(save(x)) == x bit for bit.
inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw InputError(name + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw InputError(name + ": expected an array of rows");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(name + ": rows have different lengths");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw InputError(name + ": non-numeric entry");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw InputError(name + ": non-finite entry");
      M(i, k) = x;
    }
  }
  return M;
}

/// 64-bit FNV-1a of the raw input bytes.
inline std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

struct ProblemFile {
  std::optional<Matrix> A, B, C, D, P, Q, delta, subspace;
  std::optional<double> tol;
  std::string digest;

  bool has_system() const { return A && B && C && D; }
  StateSpace system() const {
    if (!has_system()) throw InputError("problem file needs A, B, C and D");
    return StateSpace(*A, *B, *C, *D);
  }
};

namespace detail {

/// Gives an empty matrix the expected shape; checks non-empty ones.
inline void shape(std::optional<Matrix>& M, const std::string& name, Eigen::Index rows,
                  Eigen::Index cols) {
  if (!M) return;
  if (M->size() == 0 && (rows == 0 || cols == 0)) {
    M = Matrix(rows, cols);
    return;
  }
  if (M->rows() != rows || M->cols() != cols)
    throw InputError(name + " has shape " + std::to_string(M->rows()) + "x" +
                     std::to_string(M->cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

}  // namespace detail

inline ProblemFile parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed problem file: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("problem file must be a JSON object");
  static const char* known[] = {"A", "B", "C", "D", "P", "Q", "delta", "subspace", "tol"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw InputError("unknown field '" + it.key() + "'");
  }
  ProblemFile pf;
  pf.digest = fnv1a64(text);
  auto take = [&](const char* key, std::optional<Matrix>& into) {
    if (doc.contains(key)) into = matrix_from_json(doc[key], key);
  };
  take("A", pf.A);
  take("B", pf.B);
  take("C", pf.C);
  take("D", pf.D);
  take("P", pf.P);
  take("Q", pf.Q);
  take("delta", pf.delta);
  take("subspace", pf.subspace);
  if (doc.contains("tol")) {
    if (!doc["tol"].is_number()) throw InputError("tol must be a number");
    pf.tol = doc["tol"].get<double>();
    if (!(*pf.tol > 0.0) || !std::isfinite(*pf.tol)) throw InputError("tol must be positive");
  }

  if (!pf.A) throw InputError("problem file needs A");
  if (pf.A->rows() != pf.A->cols()) throw InputError("A must be square");
  const Eigen::Index n = pf.A->rows();
  std::optional<Eigen::Index> m;
  if (pf.D && pf.D->size() > 0) m = pf.D->rows();
  else if (pf.B && pf.B->cols() > 0) m = pf.B->cols();
  else if (pf.C && pf.C->rows() > 0) m = pf.C->rows();
  if (!m && (pf.B || pf.C || pf.D)) throw InputError("cannot infer the number of channels m");
  if (m) {
    detail::shape(pf.B, "B", n, *m);
    detail::shape(pf.C, "C", *m, n);
    detail::shape(pf.D, "D", *m, *m);
  }
  detail::shape(pf.P, "P", n, n);
  detail::shape(pf.Q, "Q", n, n);
  detail::shape(pf.delta, "delta", n, n);
  if (pf.subspace) {
    if (pf.subspace->size() == 0)
      pf.subspace = Matrix(n, 0);
    else if (pf.subspace->rows() != n)
      throw InputError("subspace basis must have n = " + std::to_string(n) + " rows");
  }
  return pf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw InputError("cannot read '" + path + "'");
  return ss.str();
}

// ---------------------------------------------------------------------------
// Commands

struct Options {
  std::string command;
  std::string file;
  std::optional<double> tol;
  std::optional<int> grid;
  std::optional<unsigned long long> seed;
  /// complete: from-B | from-C | from-BC
  std::string mode;
  /// lmi: P | Q
  std::string side = "Q";
  bool enumerate = false;
  std::size_t max_count = 64;
  bool biproper = false;
};

struct Outcome {
  int exit_code = kOk;
  json envelope;
  /// Human-readable diagnostic for standard error; empty on success.
  std::string message;
};

namespace detail {

struct Context {
  Tolerances tol;
  std::string tol_source = "default";
  json warnings = json::array();
  double grid_defect = 0.0;
  bool any_defect = false;

  /// Grid defect of an emitted all-pass object; fails the command when it
  /// exceeds the threshold.
  double audit(const StateSpace& s, const std::string& what) {
    const auto gd = allpass_defect(s, tol.grid, tol);
    grid_defect = std::max(grid_defect, gd.defect);
    any_defect = true;
    if (gd.skipped > 0)
      warnings.push_back(what + ": " + std::to_string(gd.skipped) +
                         " grid points skipped (poles on the unit circle)");
    if (gd.defect > defect_threshold(s, tol))
      throw NumericalError(what + " is not all-pass on the grid (defect " +
                           std::to_string(gd.defect) + ")");
    return gd.defect;
  }
};

inline json system_json(const StateSpace& s) {
  return {{"A", matrix_to_json(s.A)},
          {"B", matrix_to_json(s.B)},
          {"C", matrix_to_json(s.C)},
          {"D", matrix_to_json(s.D)}};
}

inline json degree_json(const DegreeReport& r) {
  return {{"n_state", r.n_state},
          {"n_reachable", r.n_reachable},
          {"n_observable", r.n_observable},
          {"mcmillan", r.mcmillan},
          {"minimal", r.minimal}};
}

inline json residuals_json(const CertificateResiduals& r) {
  return {{"A P A^T - P - B B^T", r.eq[0]},   {"B D^T - A P C^T", r.eq[1]},
          {"D D^T - C P C^T - I", r.eq[2]},   {"A^T Q A - Q - C^T C", r.eq[3]},
          {"C^T D - A^T Q B", r.eq[4]},       {"D^T D - B^T Q B - I", r.eq[5]}};
}

inline json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

inline Matrix need(const std::optional<Matrix>& M, const char* name, const std::string& why) {
  if (!M) throw InputError(why + " needs field " + name);
  return *M;
}

inline json cmd_check(const ProblemFile& pf, Context& ctx) {
  const StateSpace sys = pf.system();
  const auto v = is_allpass(sys, ctx.tol);
  ctx.grid_defect = v.defect;
  ctx.any_defect = true;
  if (v.skipped_grid_points > 0)
    ctx.warnings.push_back(std::to_string(v.skipped_grid_points) +
                           " grid points skipped (poles on the unit circle)");
  json out;
  out["is_allpass"] = v.is_allpass;
  out["reason"] = v.reason;
  out["degree"] = degree_json(v.degree);
  out["defect"] = v.defect;
  if (!v.degree.minimal) {
    ctx.warnings.push_back("input is not minimal; the certificate refers to the minimal "
                           "realization reported under 'minimal'");
    out["minimal"] = system_json(v.minimal);
  }
  if (v.certificate) {
    out["P0"] = matrix_to_json(v.certificate->P0);
    out["Q0"] = matrix_to_json(v.certificate->Q0);
    out["residuals"] = residuals_json(v.residuals);
    out["f_identity_defect"] = f_identity_defect(v.minimal, v.certificate->P0);
  } else {
    out["P0"] = nullptr;
    out["Q0"] = nullptr;
  }
  return out;
}

inline json cmd_complete(const ProblemFile& pf, const Options& opt, Context& ctx) {
  const std::string why = "complete " + opt.mode;
  const Matrix A = need(pf.A, "A", why);
  StateSpace sys;
  if (opt.mode == "from-B") {
    const Matrix B = need(pf.B, "B", why);
    const auto c = complete_from_B(A, B, need(pf.P, "P", why), ctx.tol);
    sys = StateSpace(A, B, c.first, c.D);
  } else if (opt.mode == "from-C") {
    const Matrix C = need(pf.C, "C", why);
    const auto c = complete_from_C(A, C, need(pf.Q, "Q", why), ctx.tol);
    sys = StateSpace(A, c.first, C, c.D);
  } else if (opt.mode == "from-BC") {
    const Matrix B = need(pf.B, "B", why), C = need(pf.C, "C", why);
    const Matrix D =
        complete_from_BC(A, B, C, need(pf.P, "P", why), need(pf.Q, "Q", why), ctx.tol);
    sys = StateSpace(A, B, C, D);
  } else {
    throw InputError("complete: --mode must be from-B, from-C or from-BC");
  }
  json out = system_json(sys);
  out["defect"] = ctx.audit(sys, "completed realization");
  return out;
}

inline json lmi_solution_json(const StateSpace& sys, const LmiSolutionP& s, Context& ctx) {
  json j;
  j["P"] = matrix_to_json(s.P);
  j["rank"] = s.P.rows() - s.kernel.dim();
  j["kernel"] = matrix_to_json(s.kernel.basis());
  j["G"] = matrix_to_json(s.G);
  j["L"] = matrix_to_json(s.L);
  const auto diag = check_clmi(s, sys.A, sys.C, ctx.tol);
  j["check"] = diag.pass;
  j["min_eigenvalue"] = diag.min_eigenvalue;
  std::optional<double> ric;
  try {
    ric = riccati_residual_P(s.P, sys.A, sys.C, ctx.tol);
  } catch (const PreconditionError&) {
  }
  j["riccati_residual"] = optional_number(ric);
  const Divisor d = left_divisor(sys, s, ctx.tol);
  j["divisor_degree"] = d.degree;
  j["divisor_defect"] = ctx.audit(d.minimal_sys, "left divisor");
  return j;
}

inline json lmi_solution_json(const StateSpace& sys, const LmiSolutionQ& s, Context& ctx) {
  json j;
  j["Q"] = matrix_to_json(s.Q);
  j["rank"] = s.Q.rows() - s.kernel.dim();
  j["kernel"] = matrix_to_json(s.kernel.basis());
  j["H"] = matrix_to_json(s.H);
  j["J"] = matrix_to_json(s.J);
  const auto diag = check_clmi(s, sys.A, sys.B, ctx.tol);
  j["check"] = diag.pass;
  j["min_eigenvalue"] = diag.min_eigenvalue;
  std::optional<double> ric;
  try {
    ric = riccati_residual_Q(s.Q, sys.A, sys.B, ctx.tol);
  } catch (const PreconditionError&) {
  }
  j["riccati_residual"] = optional_number(ric);
  const Divisor d = right_divisor(sys, s, ctx.tol);
  j["divisor_degree"] = d.degree;
  j["divisor_defect"] = ctx.audit(d.minimal_sys, "right divisor");
  return j;
}

inline json cmd_lmi(const ProblemFile& pf, const Options& opt, Context& ctx) {
  if (opt.side != "P" && opt.side != "Q") throw InputError("lmi: --side must be P or Q");
  const StateSpace sys = pf.system();
  const Certificate cert = certificate(sys, ctx.tol);
  const bool p_side = opt.side == "P";
  json out;
  out["side"] = opt.side;
  json sols = json::array();
  if (p_side) {
    const LmiSolutionP base =
        pf.delta ? nonsingular_family_member(sys, cert, *pf.delta, ctx.tol)
                 : solution_from_subspace_P(cert.P0, Subspace::zero(sys.n()), sys.A, sys.C,
                                            ctx.tol);
    if (opt.enumerate) {
      for (const auto& s : enumerate_family_P(sys, base.P, opt.max_count, ctx.tol))
        sols.push_back(lmi_solution_json(sys, s, ctx));
    } else if (pf.subspace) {
      const auto s = solution_from_subspace_P(base.P, Subspace(orth(*pf.subspace, ctx.tol)),
                                              sys.A, sys.C, ctx.tol);
      sols.push_back(lmi_solution_json(sys, s, ctx));
    } else {
      sols.push_back(lmi_solution_json(sys, base, ctx));
    }
  } else {
    const LmiSolutionQ base =
        pf.delta ? nonsingular_family_member_Q(sys, cert, *pf.delta, ctx.tol)
                 : solution_from_subspace_Q(cert.Q0, Subspace::zero(sys.n()), sys.A, sys.B,
                                            ctx.tol);
    if (opt.enumerate) {
      for (const auto& s : enumerate_family_Q(sys, base.Q, opt.max_count, ctx.tol))
        sols.push_back(lmi_solution_json(sys, s, ctx));
    } else if (pf.subspace) {
      const auto s = solution_from_subspace_Q(base.Q, Subspace(orth(*pf.subspace, ctx.tol)),
                                              sys.A, sys.B, ctx.tol);
      sols.push_back(lmi_solution_json(sys, s, ctx));
    } else {
      sols.push_back(lmi_solution_json(sys, base, ctx));
    }
  }
  out["count"] = sols.size();
  out["solutions"] = std::move(sols);
  return out;
}

inline json divisor_json(const Divisor& d, Context& ctx, const std::string& what) {
  json j = system_json(d.minimal_sys);
  j["degree"] = d.degree;
  j[d.side == Side::Left ? "P" : "Q"] = matrix_to_json(d.source);
  j["defect"] = ctx.audit(d.minimal_sys, what);
  return j;
}

inline json factorization_json(const StateSpace& sys, const Subspace& X, const Factorization& f,
                               const Options& opt, Context& ctx) {
  json j;
  j["subspace"] = matrix_to_json(X.basis());
  j["left"] = divisor_json(f.left, ctx, "left divisor");
  j["right"] = divisor_json(f.right, ctx, "right divisor");
  j["product_distance"] = f.product_distance;
  j["complementary"] = complementary_pair_check(f);
  if (opt.biproper) {
    const Divisor bl = biproper_left_divisor(sys, f.left.source, ctx.tol);
    const Divisor br = biproper_right_divisor(sys, f.right.source, ctx.tol);
    json b;
    b["left"] = divisor_json(bl, ctx, "closed-form left divisor");
    b["right"] = divisor_json(br, ctx, "closed-form right divisor");
    b["left_gauge_distance"] =
        aligned_distance(bl.minimal_sys, f.left.minimal_sys, GaugeSide::Right, ctx.tol).distance;
    b["right_gauge_distance"] =
        aligned_distance(br.minimal_sys, f.right.minimal_sys, GaugeSide::Left, ctx.tol).distance;
    j["biproper"] = std::move(b);
  }
  return j;
}

inline json cmd_factor(const ProblemFile& pf, const Options& opt, Context& ctx) {
  const StateSpace sys = pf.system();
  const Certificate cert = certificate(sys, ctx.tol);
  json out;
  json list = json::array();
  if (pf.subspace && !opt.enumerate) {
    const Subspace X(orth(*pf.subspace, ctx.tol));
    list.push_back(factorization_json(sys, X, factorize(sys, X, cert, ctx.tol), opt, ctx));
  } else {
    if (!opt.enumerate)
      ctx.warnings.push_back("no subspace given; enumerating invariant subspaces");
    for (const auto& f : enumerate_divisors(sys, opt.max_count, ctx.tol))
      list.push_back(factorization_json(sys, f.right.source_kernel, f, opt, ctx));
  }
  out["count"] = list.size();
  out["factorizations"] = std::move(list);
  return out;
}

inline json cmd_deflate(const ProblemFile& pf, Context& ctx) {
  const StateSpace sys = pf.system();
  const Deflation d = deflate_at_infinity(sys, ctx.tol);
  for (const auto& w : d.warnings) ctx.warnings.push_back(w);
  json out;
  out["q0"] = system_json(d.q0);
  out["q0_defect"] = ctx.audit(d.q0, "q0");
  json steps = json::array();
  const Eigen::Index m = sys.m();
  for (const auto& s : d.steps) {
    ctx.audit(qbar_realization(s, m), "delay factor");
    steps.push_back({{"U", matrix_to_json(s.U)}, {"p", s.p}});
  }
  json raw = json::array();
  for (std::size_t i = 0; i < d.compressions.size(); ++i)
    raw.push_back({{"V", matrix_to_json(d.compressions[i])}, {"q", d.ranks[i]}});
  out["steps"] = std::move(steps);
  out["compressions"] = std::move(raw);
  out["convention"] = "p_i = m - q_{k+1-i}, U_i = V_{k+1-i}^T";
  out["recomposition_distance"] = d.recomposition_distance;
  out["alternative_convention_distance"] =
      std::isfinite(d.alternative_distance) ? json(d.alternative_distance) : json(nullptr);
  return out;
}

}  // namespace detail

/// Resolves tolerances: flag, then problem file, then ALLPASS_TOL, then the
/// default.
inline std::pair<Tolerances, std::string> resolve_tolerances(const Options& opt,
                                                             const ProblemFile* pf,
                                                             const char* env_tol) {
  Tolerances tol;
  std::string source = "default";
  if (env_tol && *env_tol) {
    char* end = nullptr;
    const double v = std::strtod(env_tol, &end);
    if (end == env_tol || *end != '\0' || !(v > 0.0) || !std::isfinite(v))
      throw InputError(std::string("ALLPASS_TOL is not a positive number: '") + env_tol + "'");
    tol.rel = v;
    source = "environment";
  }
  if (pf && pf->tol) {
    tol.rel = *pf->tol;
    source = "file";
  }
  if (opt.tol) {
    if (!(*opt.tol > 0.0) || !std::isfinite(*opt.tol)) throw InputError("--tol must be positive");
    tol.rel = *opt.tol;
    source = "flag";
  }
  if (opt.grid) {
    if (*opt.grid < 4) throw InputError("--grid must be at least 4");
    tol.grid = *opt.grid;
  }
  if (opt.seed) tol.seed = *opt.seed;
  return {tol, source};
}

/// Runs one command on already-read file contents. Never throws.
inline Outcome run_text(const Options& opt, const std::string& text, const char* env_tol) {
  Outcome res;
  json& env = res.envelope;
  env["command"] = opt.command;
  env["input"] = {{"file", opt.file}, {"digest", fnv1a64(text)}};
  env["status"] = "ok";
  detail::Context ctx;
  json outputs;
  try {
    ProblemFile pf;
    try {
      pf = parse_problem(text);
      std::tie(ctx.tol, ctx.tol_source) = resolve_tolerances(opt, &pf, env_tol);
    } catch (const DimensionError& e) {
      throw InputError(e.what());
    }
    if (opt.command == "check") outputs = detail::cmd_check(pf, ctx);
    else if (opt.command == "complete") outputs = detail::cmd_complete(pf, opt, ctx);
    else if (opt.command == "lmi") outputs = detail::cmd_lmi(pf, opt, ctx);
    else if (opt.command == "factor") outputs = detail::cmd_factor(pf, opt, ctx);
    else if (opt.command == "deflate") outputs = detail::cmd_deflate(pf, ctx);
    else throw InputError("unknown command '" + opt.command + "'");
  } catch (const InputError& e) {
    res.exit_code = kInput;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = kMath;
    res.message = e.what();
  }
  if (res.exit_code != kOk) {
    env["status"] = "error";
    outputs = json::object();
  }
  env["outputs"] = std::move(outputs);
  json diag;
  diag["tolerances"] = {{"rel", ctx.tol.rel},
                        {"source", ctx.tol_source},
                        {"grid", ctx.tol.grid},
                        {"off_circle", ctx.tol.off_circle},
                        {"seed", ctx.tol.seed}};
  diag["grid_defect"] = ctx.any_defect ? json(ctx.grid_defect) : json(nullptr);
  diag["warnings"] = ctx.warnings;
  if (res.exit_code != kOk)
    diag["error"] = {{"kind", res.exit_code == kInput ? "input" : "precondition"},
                     {"message", res.message}};
  env["diagnostics"] = std::move(diag);
  return res;
}

/// Reads opt.file and runs the command.
inline Outcome run(const Options& opt, const char* env_tol) {
  std::string text;
  try {
    text = read_file(opt.file);
  } catch (const InputError& e) {
    Outcome res;
    res.exit_code = kInput;
    res.message = e.what();
    res.envelope = {{"command", opt.command},
                    {"input", {{"file", opt.file}, {"digest", nullptr}}},
                    {"status", "error"},
                    {"outputs", json::object()},
                    {"diagnostics",
                     {{"tolerances", nullptr},
                      {"grid_defect", nullptr},
                      {"warnings", json::array()},
                      {"error", {{"kind", "input"}, {"message", res.message}}}}}};
    return res;
  }
  return run_text(opt, text, env_tol);
}

}  // namespace allpass::cli

#endif  // ALLPASS_CLI_HPP
