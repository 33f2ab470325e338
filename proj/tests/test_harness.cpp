#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"

using namespace qsc;

namespace {

const std::string kCircuit = std::string(QSC_DATA_DIR) + "/circuits/h_toffoli_n3.txt";

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  CliResult r;
  const std::string cmd = std::string(QSC_BINARY) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / "qsc_harness_test";
  std::filesystem::create_directories(d);
  return d;
}

ExperimentSpec small(ExperimentKind k, int trials) {
  ExperimentSpec s;
  s.kind = k;
  s.trials = trials;
  s.seed = 17;
  return s;
}

}  // namespace

TEST(Experiments, KindNamesRoundTrip) {
  for (const char* name :
       {"completeness", "soundness", "lemma1", "lemma4", "claim62", "delta_trajectory", "comm_accounting"}) {
    EXPECT_STREQ(experiment_name(parse_experiment_kind(name)), name);
  }
  EXPECT_THROW(parse_experiment_kind("nonsense"), InputError);
}

TEST(Experiments, ZeroTrialsRejected) {
  EXPECT_THROW(run_experiment(small(ExperimentKind::completeness, 0)), InputError);
}

TEST(Experiments, ReproducibleFromSeed) {
  for (auto k : {ExperimentKind::completeness, ExperimentKind::soundness, ExperimentKind::lemma4,
                 ExperimentKind::delta_trajectory}) {
    ExperimentSpec s = small(k, 6);
    s.ms = {4, 8};
    s.n_primes = {1, 2};
    s.deltas = 2;
    EXPECT_EQ(run_experiment(s).to_json().dump(), run_experiment(s).to_json().dump()) << experiment_name(k);
  }
}

TEST(Experiments, ReportHasOneCsvLinePerRow) {
  ExperimentSpec s = small(ExperimentKind::soundness, 7);
  const ExperimentReport r = run_experiment(s);
  const std::string csv = r.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
  EXPECT_EQ(r.rows.size(), 7u);
  const json j = r.to_json();
  for (const char* key : {"spec", "aggregates", "checks", "rows", "ok"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(j["spec"]["kind"], "soundness");
  for (const auto& c : j["checks"]) EXPECT_FALSE(c["statement"].get<std::string>().empty());
}

TEST(Experiments, HonestCompletenessAllAccepted) {
  ExperimentSpec s = small(ExperimentKind::completeness, 100);
  s.n = 3;
  s.T = 2;
  const ExperimentReport r = run_experiment(s);
  EXPECT_EQ(r.aggregates["accepted"], 100);
  EXPECT_TRUE(r.ok());
}

TEST(Experiments, AuditedCompletenessWithinBounds) {
  ExperimentSpec s = small(ExperimentKind::completeness, 5);
  s.n = 3;
  s.T = 2;
  s.audit = true;
  const ExperimentReport r = run_experiment(s);
  EXPECT_EQ(r.aggregates["audit_violations"], 0);
  EXPECT_LT(r.aggregates["audit_log2_worst_margin"].get<double>(), 0);
  EXPECT_TRUE(r.ok());
}

TEST(Experiments, SpreadErrorSoundnessSmall) {
  ExperimentSpec s = small(ExperimentKind::soundness, 60);
  const ExperimentReport r = run_experiment(s);
  EXPECT_LE(r.aggregates["accepted"].get<int>() * 3, 60);
  EXPECT_TRUE(r.ok());
}

TEST(Experiments, HonestProverFailsTheSoundnessCheck) {
  // A truthful claim is accepted every time, so the cheating-acceptance bound must trip.
  ExperimentSpec s = small(ExperimentKind::soundness, 10);
  s.strategy = "honest";
  EXPECT_FALSE(run_experiment(s).ok());
}

TEST(TailExperiment, CornerProjectorMatchesArcsine) {
  // Delta = diag(1, 0): tr(Delta u) = cos(theta) e^{i phi1}, so the event is |cos theta| < 1/2048.
  ExperimentSpec s = small(ExperimentKind::lemma4, 100000);
  s.n_primes = {1};
  s.ms = {8};
  s.fixed_deltas = std::vector<std::vector<std::complex<double>>>{{1, 0, 0, 0}};
  const ExperimentReport r = run_experiment(s);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(r.rows[0]["threshold"].get<double>(), 1.0 / 2048);
  const double freq = r.rows[0]["empirical"].get<double>();
  EXPECT_LE(freq, 5.0 / 8);

  oracle::PrecisionScope scope(128);
  const double analytic =
      (oracle::Big(2.0) * oracle::Big::pow2(-11).asin() / oracle::Big::pi()).to_double();
  EXPECT_NEAR(analytic, 3.108e-4, 1e-6);
  const double sigma = std::sqrt(analytic * (1 - analytic) / 100000);
  EXPECT_NEAR(freq, analytic, 4 * sigma);
  EXPECT_TRUE(r.ok());
}

TEST(TailExperiment, RandomDeltasRespectTail) {
  ExperimentSpec s = small(ExperimentKind::lemma4, 1500);
  s.deltas = 2;
  const ExperimentReport r = run_experiment(s);
  EXPECT_EQ(r.rows.size(), 3u * 2u * 4u);
  EXPECT_TRUE(r.ok());
}

TEST(NoZeroExperiment, NoExactZeros) {
  ExperimentSpec s = small(ExperimentKind::lemma1, 2000);
  s.sample_p = 256;
  s.deltas = 2;
  const ExperimentReport r = run_experiment(s);
  EXPECT_TRUE(r.ok());
  for (const auto& row : r.rows) EXPECT_EQ(row["exact_zeros"], 0);
}

TEST(GridTransferExperiment, CoarseGridTransfer) {
  ExperimentSpec s = small(ExperimentKind::claim62, 1500);
  s.deltas = 2;
  EXPECT_TRUE(run_experiment(s).ok());
}

TEST(DeltaTrajectory, DecayBelowOne) {
  ExperimentSpec s = small(ExperimentKind::delta_trajectory, 30);
  s.T = 4;
  const ExperimentReport r = run_experiment(s);
  EXPECT_LT(r.aggregates["geometric_mean_decay"].get<double>(), 1.0);
  EXPECT_TRUE(r.ok());
}

TEST(Comm, FrozenTotals) {
  std::ifstream in(std::string(QSC_GOLDEN_DIR) + "/comm_n3_T2.json");
  ASSERT_TRUE(in);
  const json g = json::parse(in);
  ExperimentSpec s;
  s.kind = ExperimentKind::comm_accounting;
  s.trials = g["trials"].get<int>();
  s.seed = g["seed"].get<std::uint64_t>();
  std::ifstream cf(std::string(QSC_DATA_DIR) + "/../" + g["circuit"].get<std::string>());
  std::ostringstream text;
  text << cf.rdbuf();
  s.circuit = parse_circuit(text.str());
  const ExperimentReport r = run_experiment(s);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.rows.size(), g["totals"].size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i]["total_bits"], g["totals"][i]["total_bits"]);
    EXPECT_EQ(r.rows[i]["verifier_bits"], g["totals"][i]["verifier_bits"]);
    EXPECT_EQ(r.rows[i]["prover_bits"], g["totals"][i]["prover_bits"]);
    EXPECT_EQ(r.rows[i]["cap"], g["cap"]);
  }
}

TEST(Comm, AccountingSplitsBySenderAndRound) {
  const ProtocolParams pp = derive_params(3, 2);
  HonestStrategy h;
  const auto sr = run_protocol(parse_circuit("qubits 3\ngate H 1\ngate CNOT 1 2\n"), pp, h, 5);
  const CommReport cr = comm_accounting(sr.transcript, pp);
  EXPECT_EQ(cr.total, cr.verifier_bits + cr.prover_bits);
  std::uint64_t rounds = 0;
  for (const auto& [k, b] : cr.per_round) rounds += b;
  EXPECT_EQ(rounds, cr.total);
  EXPECT_TRUE(cr.within_cap);
  EXPECT_TRUE(cr.unitary_messages_well_formed);
  EXPECT_TRUE(cr.verdict_final_and_unique);

  Transcript broken = sr.transcript;
  broken.messages.push_back(broken.messages.back());
  EXPECT_FALSE(comm_accounting(broken, pp).verdict_final_and_unique);
}

// ----- command line

TEST(Cli, ParamsTable) {
  const auto r = cli("params -n 3 -T 2");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("1/80"), std::string::npos);
  EXPECT_NE(r.out.find("p (bits)       191"), std::string::npos);
}

TEST(Cli, ParamsRefusalIsStatusTwo) {
  const auto r = cli("params -n 3 -T 8 --max-p 500");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("816"), std::string::npos);
}

TEST(Cli, RunHonestAccepts) {
  const auto path = scratch_dir() / "t7.jsonl";
  const auto r = cli("run --circuit " + kCircuit + " --claim auto --strategy honest --seed 7 --transcript " +
                     path.string());
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("accept\n", 0), 0u);
  EXPECT_NE(r.out.find(path.string()), std::string::npos);
  std::ifstream in(path);
  std::ostringstream text;
  text << in.rdbuf();
  const Transcript t = Transcript::from_jsonl(text.str());
  ASSERT_TRUE(t.verdict());
  EXPECT_TRUE(t.verdict()->accepted);
  EXPECT_EQ(t.seed, 7u);
}

TEST(Cli, RunCheaterRejectedInBothModes) {
  const auto path = scratch_dir() / "t8.jsonl";
  for (const char* extra : {"", " --two-process"}) {
    const auto r = cli("run --circuit " + kCircuit + " --strategy spread-error --seed 8 --transcript " +
                       path.string() + extra);
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out.rfind("reject\n", 0), 0u);
  }
}

TEST(Cli, ReduceQcircuit) {
  const auto r = cli("reduce qcircuit --in " + kCircuit);
  EXPECT_EQ(r.status, 0);
  const Circuit c = parse_circuit(r.out);
  EXPECT_EQ(c.n, 4);
  EXPECT_EQ(c.T(), 5);
}

TEST(Cli, ReducePostbqpWritesTwoFiles) {
  const auto base = (scratch_dir() / "pair").string();
  const auto r = cli("reduce postbqp --in " + kCircuit + " --out " + base);
  EXPECT_EQ(r.status, 0);
  EXPECT_TRUE(std::filesystem::exists(base + ".y.txt"));
  EXPECT_TRUE(std::filesystem::exists(base + ".z.txt"));
}

TEST(Cli, ExperimentStatusFollowsChecks) {
  EXPECT_EQ(cli("experiment completeness --trials 3 --seed 2").status, 0);
  const auto bad = cli("experiment soundness --strategy honest --trials 5 --seed 2");
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("FAIL cheating acceptance"), std::string::npos);
}

TEST(Cli, ExperimentWritesJsonAndCsv) {
  const auto dir = scratch_dir();
  const auto r = cli("experiment comm_accounting --trials 2 --json " + (dir / "c.json").string() + " --csv " +
                     (dir / "c.csv").string());
  EXPECT_EQ(r.status, 0);
  std::ifstream j(dir / "c.json");
  EXPECT_TRUE(json::parse(j)["ok"].get<bool>());
  std::ifstream c(dir / "c.csv");
  std::string header;
  std::getline(c, header);
  EXPECT_NE(header.find("total_bits"), std::string::npos);
}

TEST(Cli, SelftestPasses) {
  const auto r = cli("selftest --per-property 20");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, UsageAndInputErrorsAreStatusTwo) {
  EXPECT_EQ(cli("").status, 2);
  EXPECT_EQ(cli("frobnicate").status, 2);
  EXPECT_EQ(cli("params -n 3").status, 2);
  EXPECT_EQ(cli("run --circuit /nonexistent/c.txt").status, 2);
  EXPECT_EQ(cli("experiment nonsense").status, 2);
  const auto bad = scratch_dir() / "bad.txt";
  std::ofstream(bad) << "qubits 3\ngate CNOT 1 1\n";
  const auto r = cli("run --circuit " + bad.string());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("line 2"), std::string::npos);
}
