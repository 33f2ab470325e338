// qsc: parameters, single sessions, reductions, experiments and the invariant suite.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "qsumcheck/qsumcheck.hpp"

using namespace qsc;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

struct ProfileOptions {
  std::string profile = "paper-exact";
  int mu_bits = 40;
  int xi_exponent = 60;
  int max_p = kDefaultMaxPrecision;

  void add(CLI::App* app) {
    app->add_option("--profile", profile, "paper-exact | relaxed | fine-grid")
        ->check(CLI::IsMember({"paper-exact", "relaxed", "fine-grid"}));
    app->add_option("--mu-bits", mu_bits, "relaxed profile: mu = 2^-mu_bits");
    app->add_option("--xi-exp", xi_exponent, "relaxed profile: xi = 2^-xi_exp");
    app->add_option("--max-p", max_p, "refuse parameter sets needing more bits");
  }

  Profile kind() const {
    if (profile == "relaxed") return Profile::relaxed;
    if (profile == "fine-grid") return Profile::fine_grid;
    return Profile::paper_exact;
  }

  ProtocolParams make(int n, int T) const {
    switch (kind()) {
      case Profile::relaxed: return relaxed_params(n, T, mu_bits, xi_exponent, max_p);
      case Profile::fine_grid: return fine_grid_params(n, T, max_p);
      case Profile::paper_exact: break;
    }
    return derive_params(n, T, max_p);
  }
};

// "a", "a/b" or a decimal, optionally "re,im".
mpq_class parse_rational(const std::string& s) {
  mpq_class q;
  const auto dot = s.find('.');
  if (dot == std::string::npos) {
    if (q.set_str(s, 10) != 0) throw InputError("bad number '" + s + "'");
    q.canonicalize();
    return q;
  }
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  const std::size_t places = s.size() - dot - 1;
  mpz_class num;
  if (num.set_str(digits, 10) != 0) throw InputError("bad number '" + s + "'");
  mpz_class den;
  mpz_ui_pow_ui(den.get_mpz_t(), 10, places);
  q = mpq_class(num, den);
  q.canonicalize();
  return q;
}

FixedComplex parse_claim(const std::string& s, const PrecisionContext& ctx) {
  const auto comma = s.find(',');
  const mpq_class re = parse_rational(s.substr(0, comma));
  const mpq_class im = comma == std::string::npos ? mpq_class(0) : parse_rational(s.substr(comma + 1));
  return {truncate(re, ctx), truncate(im, ctx)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum sum-check style interactive proof engine"};
  app.require_subcommand(1);

  // params
  auto* params_cmd = app.add_subcommand("params", "print derived protocol parameters");
  int pn = 3;
  int pT = 2;
  bool params_json = false;
  ProfileOptions params_profile;
  params_cmd->add_option("-n", pn, "qubits")->required();
  params_cmd->add_option("-T", pT, "gates")->required();
  params_cmd->add_flag("--json", params_json, "machine-readable output");
  params_profile.add(params_cmd);

  // run
  auto* run_cmd = app.add_subcommand("run", "run one protocol session");
  std::string run_circuit;
  std::string run_claim = "auto";
  std::string run_strategy = "honest";
  std::string run_offset = "1";
  std::uint64_t run_seed = 1;
  std::string run_transcript;
  bool run_two_process = false;
  ProfileOptions run_profile;
  run_cmd->add_option("--circuit", run_circuit, "circuit file")->required();
  run_cmd->add_option("--claim", run_claim, "auto (prover supplies C) or re[,im] held by the verifier");
  run_cmd->add_option("--strategy", run_strategy, "honest | constant-offset | spread-error | replay")
      ->check(CLI::IsMember({"honest", "constant-offset", "spread-error", "replay"}));
  run_cmd->add_option("--offset", run_offset, "cheating offset as a multiple of K");
  run_cmd->add_option("--seed", run_seed, "verifier seed");
  run_cmd->add_option("--transcript", run_transcript, "transcript path (default transcript-<seed>.jsonl)");
  run_cmd->add_flag("--two-process", run_two_process, "prover in a forked process over pipes");
  run_profile.add(run_cmd);

  // reduce
  auto* reduce_cmd = app.add_subcommand("reduce", "apply a circuit reduction");
  std::string reduce_kind;
  std::string reduce_in;
  std::string reduce_out;
  reduce_cmd->add_option("kind", reduce_kind, "qcircuit | postbqp")
      ->required()
      ->check(CLI::IsMember({"qcircuit", "postbqp"}));
  reduce_cmd->add_option("--in", reduce_in, "input circuit")->required();
  reduce_cmd->add_option("--out", reduce_out,
                         "output path (postbqp writes <out>.y.txt and <out>.z.txt); stdout if absent");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Monte Carlo experiment with bound checks");
  ExperimentSpec spec;
  std::string exp_kind;
  std::string exp_circuit;
  std::string exp_offset = "1";
  std::string exp_json;
  std::string exp_csv;
  ProfileOptions exp_profile;
  exp_cmd->add_option("kind", exp_kind,
                      "completeness | soundness | lemma1 | lemma4 | claim62 | delta_trajectory | "
                      "comm_accounting")
      ->required();
  exp_cmd->add_option("--trials", spec.trials, "trials (samples per cell for tail experiments)");
  exp_cmd->add_option("--seed", spec.seed, "base seed");
  exp_cmd->add_option("--circuit", exp_circuit, "fixed circuit file (random circuits otherwise)");
  exp_cmd->add_option("-n", spec.n, "random circuit qubits");
  exp_cmd->add_option("-T", spec.T, "random circuit gates");
  exp_cmd->add_option("--strategy", spec.strategy, "cheating strategy")
      ->check(CLI::IsMember({"honest", "constant-offset", "spread-error", "replay"}));
  exp_cmd->add_option("--offset", exp_offset, "|C - tr A| as a multiple of K");
  exp_cmd->add_flag("--audit", spec.audit, "replay honest sessions against a 4p-bit shadow");
  exp_cmd->add_option("--n-prime", spec.n_primes, "local sizes for tail experiments");
  exp_cmd->add_option("-m", spec.ms, "m values for the tail experiment");
  exp_cmd->add_option("--deltas", spec.deltas, "random error operators per local size");
  exp_cmd->add_option("--sample-p", spec.sample_p, "precision for tail experiments");
  exp_cmd->add_option("--coarse-exp", spec.coarse_exponent, "coarse grid exponent (claim62)");
  exp_cmd->add_option("--json", exp_json, "write the report as JSON");
  exp_cmd->add_option("--csv", exp_csv, "write per-trial rows as CSV");
  exp_profile.add(exp_cmd);

  // selftest
  auto* self_cmd = app.add_subcommand("selftest", "randomized operator invariant suite");
  std::uint64_t self_seed = 1;
  int self_count = 200;
  self_cmd->add_option("--seed", self_seed, "seed");
  self_cmd->add_option("--per-property", self_count, "instances per property");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*params_cmd) {
      const ProtocolParams pp = params_profile.make(pn, pT);
      if (params_json) {
        std::cout << json{{"profile", profile_name(pp.profile)},
                          {"n", pp.n},
                          {"T", pp.T},
                          {"n_prime", pp.n_prime},
                          {"K", pp.K.get_str()},
                          {"chi", pp.chi.get_str()},
                          {"log2_inv_mu", log2q(1 / pp.mu)},
                          {"xi_exponent", pp.xi_exponent},
                          {"m", pp.m},
                          {"p", pp.p},
                          {"bit_cap", pp.bit_cap().get_str()}}
                         .dump(2)
                  << "\n";
      } else {
        std::cout << pp.report();
      }
      return 0;
    }

    if (*run_cmd) {
      const Circuit c = parse_circuit(read_file(run_circuit));
      const ProtocolParams pp = run_profile.make(c.n, c.T());
      std::optional<FixedComplex> claim;
      if (run_claim != "auto") claim = parse_claim(run_claim, pp.context());
      auto strategy = make_strategy(run_strategy, parse_rational(run_offset) * pp.K);
      const SessionResult r = run_two_process
                                  ? run_protocol_two_process(c, pp, *strategy, run_seed, claim)
                                  : run_protocol(c, pp, *strategy, run_seed, claim);
      const std::string path =
          run_transcript.empty() ? "transcript-" + std::to_string(run_seed) + ".jsonl" : run_transcript;
      write_file(path, r.transcript.to_jsonl());
      std::cout << (r.verdict.accepted ? "accept" : "reject") << "\n";
      std::cout << "round " << r.verdict.round << ": " << r.verdict.reason << "\n";
      std::cout << "p " << pp.p << ", bits " << r.transcript.total_bits() << "\n";
      std::cout << "transcript " << path << "\n";
      return 0;
    }

    if (*reduce_cmd) {
      const Circuit c = parse_circuit(read_file(reduce_in));
      if (reduce_kind == "qcircuit") {
        const std::string text = serialize_circuit(qcircuit_reduction(c));
        if (reduce_out.empty()) {
          std::cout << text;
        } else {
          write_file(reduce_out, text);
          std::cout << reduce_out << "\n";
        }
      } else {
        const TracePair pair = postbqp_trace_pair(c);
        if (reduce_out.empty()) {
          std::cout << "# y\n" << serialize_circuit(pair.y) << "# z\n" << serialize_circuit(pair.z);
        } else {
          write_file(reduce_out + ".y.txt", serialize_circuit(pair.y));
          write_file(reduce_out + ".z.txt", serialize_circuit(pair.z));
          std::cout << reduce_out << ".y.txt\n" << reduce_out << ".z.txt\n";
        }
      }
      return 0;
    }

    if (*exp_cmd) {
      spec.kind = parse_experiment_kind(exp_kind);
      spec.profile = exp_profile.kind();
      spec.relaxed_mu_bits = exp_profile.mu_bits;
      spec.relaxed_xi_exponent = exp_profile.xi_exponent;
      spec.offset_in_K = parse_rational(exp_offset);
      if (!exp_circuit.empty()) spec.circuit = parse_circuit(read_file(exp_circuit));
      if (spec.kind == ExperimentKind::claim62 && spec.n_primes.size() == 1) {
        spec.transfer_n_prime = spec.n_primes.front();
      }
      const ExperimentReport rep = run_experiment(spec);
      if (!exp_json.empty()) write_file(exp_json, rep.to_json().dump(2) + "\n");
      if (!exp_csv.empty()) write_file(exp_csv, rep.to_csv());
      std::cout << rep.aggregates.dump() << "\n";
      for (const auto& c : rep.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": empirical " << c.empirical
                  << " vs bound " << c.bound << " (+" << c.slack << ")\n";
      }
      return rep.ok() ? 0 : 1;
    }

    if (*self_cmd) {
      const SelftestResult r = run_selftest(self_seed, self_count);
      for (const auto& t : r.properties) {
        std::cout << (t.failures == 0 ? "PASS " : "FAIL ") << t.name << " (" << t.statement
                  << "): " << t.instances - t.failures << "/" << t.instances << "\n";
      }
      std::cout << "identity counterexample to the rank-free bound: "
                << (r.identity_counterexample_holds ? "confirmed" : "missing") << "\n";
      return r.failures() == 0 ? 0 : 1;
    }
  } catch (const ParameterRefusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
