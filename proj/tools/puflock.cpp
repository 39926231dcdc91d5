// puflock: bind MLP model weights to a simulated machine PUF.
//
// Pipeline: gen-data -> train -> encrypt -> run/decrypt (+ rebind on
// hardware swap), plus the sweep / clone-eval experiment harness and
// puf-stats diagnostics. All randomness is seeded through flags, so every
// command is deterministic given its arguments.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "puflock/puflock.hpp"

namespace {

// Exit codes: machine-readable error categories.
constexpr int kOkExit = 0;
constexpr int kUsageExit = 2;
constexpr int kParseExit = 3;
constexpr int kDimensionExit = 4;
constexpr int kMissingSeedExit = 5;

constexpr const char* kSeedEnvVar = "PUFLOCK_MACHINE_SEED";

struct MissingSeedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long value = std::strtoull(text.c_str(), &end, 10);
  if (errno != 0 || end == text.c_str() || *end != '\0') {
    throw puflock::ConfigError(what + ": not an unsigned integer: \"" + text +
                               "\"");
  }
  return value;
}

// Flag wins over the environment; a missing seed is a hard error — a silent
// default would act as a universal skeleton key.
std::uint64_t resolve_machine_seed(const std::optional<std::uint64_t>& flag,
                                   const char* flag_name = "--machine-seed") {
  if (flag) return *flag;
  if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env) {
    return parse_u64(env, std::string(kSeedEnvVar));
  }
  throw MissingSeedError(std::string("missing machine seed: pass ") +
                         flag_name + " or set " + kSeedEnvVar);
}

struct PufFlags {
  int stages = 64;
  int chains = 4;
  double noise = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--stages", stages, "Arbiter chain length")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--chains", chains, "Number of XORed arbiter chains")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--noise", noise, "Evaluation noise sigma (0 = none)")
        ->check(CLI::NonNegativeNumber);
  }

  puflock::PufConfig config() const {
    puflock::PufConfig cfg;
    cfg.n_stages = stages;
    cfg.k_chains = chains;
    cfg.noise_sigma = noise;
    cfg.validate();
    return cfg;
  }
};

std::string format4(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

void emit_report(const auto& report, const std::string& csv_path,
                 const std::string& json_path) {
  if (!csv_path.empty()) puflock::report_csv(report, csv_path);
  if (!json_path.empty()) puflock::report_json(report, json_path);
  if (csv_path.empty() && json_path.empty()) {
    std::cout << puflock::report_csv(report);
  }
}

std::vector<double> default_pcts() {
  return {0, 5, 10, 15, 20, 25, 30, 35, 40};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bind neural-network weights to a machine's simulated PUF"};
  app.require_subcommand(1);

  // ---- gen-data ----------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-data", "Generate a synthetic Gaussian-blob dataset as IDX files");
  struct {
    std::string images, labels;
    int classes = 10, dim = 16, per_class = 200;
    double radius = 4.0, sigma = 1.0;
    std::uint64_t seed = 1;
  } gd;
  gen->add_option("--images", gd.images, "Output IDX images path")->required();
  gen->add_option("--labels", gd.labels, "Output IDX labels path")->required();
  gen->add_option("--classes", gd.classes, "Number of classes")
      ->check(CLI::Range(2, 255));
  gen->add_option("--dim", gd.dim, "Feature dimension")
      ->check(CLI::PositiveNumber);
  gen->add_option("--per-class", gd.per_class, "Samples per class")
      ->check(CLI::PositiveNumber);
  gen->add_option("--radius", gd.radius, "Class-mean distance from origin");
  gen->add_option("--sigma", gd.sigma, "Within-class standard deviation");
  gen->add_option("--seed", gd.seed, "Dataset RNG seed");
  gen->callback([&] {
    const puflock::Dataset data = puflock::gen_synthetic(
        gd.seed, gd.classes, gd.dim, gd.per_class, gd.radius, gd.sigma);
    puflock::save_idx(data, gd.images, gd.labels);
    std::cout << "Wrote " << data.num_samples() << " samples ("
              << gd.classes << " classes, dim " << gd.dim << ") to "
              << gd.images << " / " << gd.labels << "\n";
  });

  // ---- train -------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train an MLP and save it");
  struct {
    std::string images, labels, out;
    std::vector<int> hidden = {64};
    int epochs = 40, batch = 32;
    double lr = 0.05;
    std::uint64_t seed = 1;
    bool json = false;
  } tc;
  tr->add_option("--images", tc.images, "IDX images path")->required();
  tr->add_option("--labels", tc.labels, "IDX labels path")->required();
  tr->add_option("--out", tc.out, "Output model path")->required();
  tr->add_option("--hidden", tc.hidden, "Hidden layer widths")
      ->delimiter(',');
  tr->add_option("--epochs", tc.epochs, "Training epochs")
      ->check(CLI::NonNegativeNumber);
  tr->add_option("--batch", tc.batch, "Batch size")
      ->check(CLI::PositiveNumber);
  tr->add_option("--lr", tc.lr, "Learning rate");
  tr->add_option("--seed", tc.seed, "Training RNG seed");
  tr->add_flag("--json", tc.json, "Machine-readable output");
  tr->callback([&] {
    const puflock::Dataset data = puflock::load_idx(tc.images, tc.labels);
    puflock::TrainConfig cfg;
    cfg.hidden_dims = tc.hidden;
    cfg.epochs = tc.epochs;
    cfg.batch_size = tc.batch;
    cfg.learning_rate = tc.lr;
    cfg.rng_seed = tc.seed;
    const puflock::Model model = puflock::train(data, cfg);
    puflock::save_model(model, tc.out);
    const double acc = puflock::evaluate(model, data);
    if (tc.json) {
      std::cout << nlohmann::json{{"accuracy", acc}, {"model", tc.out}}.dump()
                << "\n";
    } else {
      std::cout << "Accuracy = " << format4(acc) << "\n";
    }
  });

  // ---- encrypt -----------------------------------------------------------
  auto* enc = app.add_subcommand(
      "encrypt", "Encrypt a share of one layer's weights for this machine");
  struct {
    std::string model, out, helper, images, labels;
    int layer = 0;
    double pct = 0;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> machine_seed;
    PufFlags puf;
    bool json = false;
  } ec;
  enc->add_option("--model", ec.model, "Input model path")->required();
  enc->add_option("--out", ec.out, "Output encrypted model path")->required();
  enc->add_option("--helper", ec.helper, "Output helper-data path")
      ->required();
  enc->add_option("--images", ec.images, "IDX images for accuracy report")
      ->required();
  enc->add_option("--labels", ec.labels, "IDX labels for accuracy report")
      ->required();
  enc->add_option("--layer", ec.layer, "Layer to encrypt (0-based)")
      ->check(CLI::NonNegativeNumber);
  enc->add_option("--pct", ec.pct, "Percentage of weights to encrypt")
      ->required()
      ->check(CLI::Range(0.0, 100.0));
  enc->add_option("--seed", ec.seed, "Selection/challenge RNG seed");
  enc->add_option("--machine-seed", ec.machine_seed,
                  "Machine PUF seed (or env " + std::string(kSeedEnvVar) + ")");
  ec.puf.attach(enc);
  enc->add_flag("--json", ec.json, "Machine-readable output");
  enc->callback([&] {
    const std::uint64_t machine = resolve_machine_seed(ec.machine_seed);
    const puflock::Model model = puflock::load_model(ec.model);
    const puflock::Dataset data = puflock::load_idx(ec.images, ec.labels);
    const double before = puflock::evaluate(model, data);
    const puflock::XorArbiterPuf puf(machine, ec.puf.config());
    const auto [encrypted, helper] =
        puflock::encrypt_model(model, ec.layer, ec.pct, puf, ec.seed);
    puflock::save_model(encrypted, ec.out);
    puflock::save_helper(helper, ec.helper);
    const double after = puflock::evaluate(encrypted, data);
    if (ec.json) {
      std::cout << nlohmann::json{{"accuracy_before", before},
                                  {"accuracy_after", after},
                                  {"encrypted_weights", helper.entries.size()}}
                       .dump()
                << "\n";
    } else {
      std::cout << "Accuracy before encryption = " << format4(before) << "\n";
      std::cout << "Accuracy after encryption  = " << format4(after) << "\n";
    }
  });

  // ---- decrypt -----------------------------------------------------------
  auto* dec = app.add_subcommand(
      "decrypt", "Decrypt in memory and report accuracy on this machine");
  struct {
    std::string model, helper, images, labels, out;
    std::optional<std::uint64_t> machine_seed;
    PufFlags puf;
    bool emit_plaintext = false;
    bool json = false;
  } dc;
  dec->add_option("--model", dc.model, "Encrypted model path")->required();
  dec->add_option("--helper", dc.helper, "Helper-data path")->required();
  dec->add_option("--images", dc.images, "IDX images path")->required();
  dec->add_option("--labels", dc.labels, "IDX labels path")->required();
  dec->add_option("--machine-seed", dc.machine_seed,
                  "Machine PUF seed (or env " + std::string(kSeedEnvVar) + ")");
  dc.puf.attach(dec);
  dec->add_flag("--emit-plaintext", dc.emit_plaintext,
                "Write the decrypted model to --out (defeats binding)");
  dec->add_option("--out", dc.out,
                  "Output path for --emit-plaintext decrypted model");
  dec->add_flag("--json", dc.json, "Machine-readable output");
  dec->callback([&] {
    const std::uint64_t machine = resolve_machine_seed(dc.machine_seed);
    const puflock::Model model = puflock::load_model(dc.model);
    const puflock::HelperData helper = puflock::load_helper(dc.helper);
    const puflock::Dataset data = puflock::load_idx(dc.images, dc.labels);
    const puflock::XorArbiterPuf puf(machine, dc.puf.config());
    const puflock::Model plain = puflock::decrypt_model(model, helper, puf);
    const double acc = puflock::evaluate(plain, data);
    if (dc.emit_plaintext) {
      if (dc.out.empty()) {
        throw puflock::ConfigError("decrypt: --emit-plaintext requires --out");
      }
      std::cerr << "warning: writing decrypted weights to " << dc.out
                << " removes the hardware binding; intended for debugging\n";
      puflock::save_model(plain, dc.out);
    }
    if (dc.json) {
      std::cout << nlohmann::json{{"accuracy", acc}}.dump() << "\n";
    } else {
      std::cout << "Accuracy = " << format4(acc) << "\n";
    }
  });

  // ---- run ---------------------------------------------------------------
  auto* run = app.add_subcommand(
      "run", "Evaluate a model; with --helper, decrypt in memory first");
  struct {
    std::string model, helper, images, labels;
    std::optional<std::uint64_t> machine_seed;
    PufFlags puf;
    bool json = false;
  } rc;
  run->add_option("--model", rc.model, "Model path")->required();
  run->add_option("--helper", rc.helper,
                  "Helper-data path (enables in-memory decryption)");
  run->add_option("--images", rc.images, "IDX images path")->required();
  run->add_option("--labels", rc.labels, "IDX labels path")->required();
  run->add_option("--machine-seed", rc.machine_seed,
                  "Machine PUF seed (or env " + std::string(kSeedEnvVar) + ")");
  rc.puf.attach(run);
  run->add_flag("--json", rc.json, "Machine-readable output");
  run->callback([&] {
    puflock::Model model = puflock::load_model(rc.model);
    const puflock::Dataset data = puflock::load_idx(rc.images, rc.labels);
    if (!rc.helper.empty()) {
      const std::uint64_t machine = resolve_machine_seed(rc.machine_seed);
      const puflock::HelperData helper = puflock::load_helper(rc.helper);
      const puflock::XorArbiterPuf puf(machine, rc.puf.config());
      model = puflock::decrypt_model(model, helper, puf);
    }
    const double acc = puflock::evaluate(model, data);
    if (rc.json) {
      std::cout << nlohmann::json{{"accuracy", acc}}.dump() << "\n";
    } else {
      std::cout << "Accuracy = " << format4(acc) << "\n";
    }
  });

  // ---- rebind ------------------------------------------------------------
  auto* reb = app.add_subcommand(
      "rebind", "Re-encrypt for new hardware (old machine decrypts first)");
  struct {
    std::string model, helper, out, helper_out;
    std::optional<std::uint64_t> old_seed, new_seed;
    std::uint64_t seed = 1;
    PufFlags puf;
  } rb;
  reb->add_option("--model", rb.model, "Encrypted model path")->required();
  reb->add_option("--helper", rb.helper, "Helper-data path")->required();
  reb->add_option("--out", rb.out, "Output re-encrypted model path")
      ->required();
  reb->add_option("--helper-out", rb.helper_out, "Output helper-data path")
      ->required();
  reb->add_option("--old-seed", rb.old_seed, "Current machine PUF seed");
  reb->add_option("--new-seed", rb.new_seed, "Replacement machine PUF seed");
  reb->add_option("--seed", rb.seed, "Fresh-challenge RNG seed");
  rb.puf.attach(reb);
  reb->callback([&] {
    if (!rb.old_seed) {
      throw MissingSeedError("rebind: --old-seed is required");
    }
    if (!rb.new_seed) {
      throw MissingSeedError("rebind: --new-seed is required");
    }
    const puflock::Model model = puflock::load_model(rb.model);
    const puflock::HelperData helper = puflock::load_helper(rb.helper);
    const puflock::PufConfig cfg = rb.puf.config();
    const puflock::XorArbiterPuf old_puf(*rb.old_seed, cfg);
    const puflock::XorArbiterPuf new_puf(*rb.new_seed, cfg);
    const auto [rebound, new_helper] =
        puflock::rebind(model, helper, old_puf, new_puf, rb.seed);
    puflock::save_model(rebound, rb.out);
    puflock::save_helper(new_helper, rb.helper_out);
    std::cout << "Rebound " << new_helper.entries.size() << " weights to "
              << rb.out << "\n";
  });

  // ---- sweep -------------------------------------------------------------
  auto* sw = app.add_subcommand(
      "sweep", "Accuracy-degradation sweep over encryption percentages");
  struct {
    std::string model, images, labels, csv, json_path;
    int layer = 0, trials = 10;
    std::vector<double> pcts = default_pcts();
    std::uint64_t master_seed = 1;
    std::optional<std::uint64_t> machine_seed;
    std::string mode = "nested";
    PufFlags puf;
  } sc;
  sw->add_option("--model", sc.model, "Model path")->required();
  sw->add_option("--images", sc.images, "IDX images path")->required();
  sw->add_option("--labels", sc.labels, "IDX labels path")->required();
  sw->add_option("--layer", sc.layer, "Layer to encrypt")
      ->check(CLI::NonNegativeNumber);
  sw->add_option("--pcts", sc.pcts, "Percentages to sweep")->delimiter(',');
  sw->add_option("--trials", sc.trials, "Trials per percentage")
      ->check(CLI::PositiveNumber);
  sw->add_option("--master-seed", sc.master_seed, "Master experiment seed");
  sw->add_option("--machine-seed", sc.machine_seed,
                 "Machine PUF seed (or env " + std::string(kSeedEnvVar) + ")");
  sw->add_option("--mode", sc.mode, "Subset mode across percentages")
      ->check(CLI::IsMember({"nested", "independent"}));
  sw->add_option("--csv", sc.csv, "Write CSV report here");
  sw->add_option("--json", sc.json_path, "Write JSON report here");
  sc.puf.attach(sw);
  sw->callback([&] {
    const puflock::Model model = puflock::load_model(sc.model);
    const puflock::Dataset data = puflock::load_idx(sc.images, sc.labels);
    puflock::SweepConfig cfg;
    cfg.percentages = sc.pcts;
    cfg.trials = sc.trials;
    cfg.layer_id = sc.layer;
    cfg.master_seed = sc.master_seed;
    cfg.machine_seed = resolve_machine_seed(sc.machine_seed);
    cfg.mode = sc.mode == "nested" ? puflock::SelectionMode::kNested
                                   : puflock::SelectionMode::kIndependent;
    const puflock::XorArbiterPuf puf(cfg.machine_seed, sc.puf.config());
    const puflock::SweepReport report =
        puflock::degradation_sweep(model, data, cfg, puf);
    emit_report(report, sc.csv, sc.json_path);
  });

  // ---- clone-eval --------------------------------------------------------
  auto* cl = app.add_subcommand(
      "clone-eval", "Compare decryption on the target machine vs clones");
  struct {
    std::string model, images, labels, csv, json_path;
    int layer = 0;
    std::vector<double> pcts = default_pcts();
    std::optional<std::uint64_t> target_seed;
    std::vector<std::uint64_t> clone_seeds;
    std::uint64_t master_seed = 1;
    PufFlags puf;
  } cc;
  cl->add_option("--model", cc.model, "Model path")->required();
  cl->add_option("--images", cc.images, "IDX images path")->required();
  cl->add_option("--labels", cc.labels, "IDX labels path")->required();
  cl->add_option("--layer", cc.layer, "Layer to encrypt")
      ->check(CLI::NonNegativeNumber);
  cl->add_option("--pcts", cc.pcts, "Percentages to evaluate")
      ->delimiter(',');
  cl->add_option("--target-seed", cc.target_seed,
                 "Target machine PUF seed (or env " +
                     std::string(kSeedEnvVar) + ")");
  cl->add_option("--clone-seeds", cc.clone_seeds,
                 "Clone machine PUF seeds (default: target+1, target+2)")
      ->delimiter(',');
  cl->add_option("--master-seed", cc.master_seed, "Master experiment seed");
  cl->add_option("--csv", cc.csv, "Write CSV report here");
  cl->add_option("--json", cc.json_path, "Write JSON report here");
  cc.puf.attach(cl);
  cl->callback([&] {
    const std::uint64_t target =
        resolve_machine_seed(cc.target_seed, "--target-seed");
    std::vector<std::uint64_t> clones = cc.clone_seeds;
    if (clones.empty()) clones = {target + 1, target + 2};
    const puflock::Model model = puflock::load_model(cc.model);
    const puflock::Dataset data = puflock::load_idx(cc.images, cc.labels);
    const puflock::CloneReport report = puflock::clone_eval(
        model, data, cc.layer, cc.pcts, target, clones, cc.master_seed);
    emit_report(report, cc.csv, cc.json_path);
  });

  // ---- puf-stats ---------------------------------------------------------
  auto* ps = app.add_subcommand(
      "puf-stats", "Bit balance of this machine's PUF; uniqueness vs another");
  struct {
    std::optional<std::uint64_t> machine_seed, other_seed;
    int challenges = 1000;
    std::uint64_t rng_seed = 1;
    PufFlags puf;
    bool json = false;
  } pc;
  ps->add_option("--machine-seed", pc.machine_seed,
                 "Machine PUF seed (or env " + std::string(kSeedEnvVar) + ")");
  ps->add_option("--other-seed", pc.other_seed,
                 "Second machine seed for uniqueness");
  ps->add_option("--challenges", pc.challenges, "Challenges to sample")
      ->check(CLI::PositiveNumber);
  ps->add_option("--rng-seed", pc.rng_seed, "Challenge-draw RNG seed");
  pc.puf.attach(ps);
  ps->add_flag("--json", pc.json, "Machine-readable output");
  ps->callback([&] {
    const std::uint64_t machine = resolve_machine_seed(pc.machine_seed);
    const puflock::PufConfig cfg = pc.puf.config();
    const puflock::XorArbiterPuf puf(machine, cfg);
    const double balance =
        puflock::bit_balance(puf, pc.challenges, pc.rng_seed);
    std::optional<double> uniq;
    if (pc.other_seed) {
      uniq = puflock::uniqueness(machine, *pc.other_seed, cfg, pc.challenges,
                                 pc.rng_seed);
    }
    if (pc.json) {
      nlohmann::json out{{"balance", balance}};
      if (uniq) out["uniqueness"] = *uniq;
      std::cout << out.dump() << "\n";
    } else {
      std::cout << "balance = " << format4(balance) << "\n";
      if (uniq) std::cout << "uniqueness = " << format4(*uniq) << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOkExit : kUsageExit;
  } catch (const MissingSeedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingSeedExit;
  } catch (const puflock::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDimensionExit;
  } catch (const puflock::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParseExit;
  } catch (const puflock::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOkExit;
}
