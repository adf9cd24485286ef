#include "advmal/cli.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "advmal/attacks.hpp"
#include "advmal/checkpoint.hpp"
#include "advmal/experiment.hpp"
#include "advmal/parallel.hpp"
#include "advmal/training.hpp"
#include "json.hpp"

namespace advmal::cli {

namespace fs = std::filesystem;

namespace {

// Every configuration key; the config file uses the same names.
struct Settings {
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string output_dir = "runs";

  std::string data_train;
  std::string data_validation;
  std::string data_test;
  std::string data_policy;
  std::size_t data_dim = 200;
  std::vector<std::size_t> data_per_class{500, 500};
  double data_flip_noise = 0.05;
  double data_prototype_density = 0.5;
  double data_addition_fraction = 0.75;
  double data_removal_fraction = 0.5;
  std::vector<double> data_split{0.6, 0.2, 0.2};
  int positive_class = 1;

  std::vector<std::string> defenses{"basic", "at"};
  std::vector<std::size_t> model_hidden{160, 160};
  std::string model_activation = "relu";
  std::size_t train_epochs = 150;
  std::size_t train_batch_size = 128;
  double train_lr = 1e-3;
  double train_oversample_ratio = 1.0;
  double binarization_threshold = 0.5;
  std::string perturbed_classes = "1";
  std::size_t dae_latent = 0;
  double at_lr = 0.02;
  std::size_t at_steps = 100;
  std::size_t at_restarts = 0;
  double at_noise_max = 0.1;
  double ar_lr = 0.01;
  std::size_t ar_steps = 60;
  std::size_t ar_restarts = 0;
  double ar_noise_max = 0.1;
  std::size_t ensemble_size = 5;
  double ensemble_subspace = 0.5;
  double ensemble_data_fraction = 0.8;
  std::string ensemble_base = "at_dae";

  std::vector<std::string> attacks{"all"};
  std::size_t attack_pool = 800;
  std::string threat = "grey-box";
  std::vector<std::size_t> surrogate_hidden{200, 200};
  std::size_t surrogate_epochs = 30;
  std::size_t surrogate_batch_size = 128;
  double surrogate_lr = 1e-3;
  std::size_t iterative_steps = 100;
  double fgsm_epsilon = 1.0;
  std::size_t pgd_steps = 100;
  double pgd_l1_step = 1.0;
  double pgd_l2_step = 1.0;
  double pgd_linf_step = 0.01;
  double pgd_adam_step = 0.01;
  double pgd_epsilon_ball = std::numeric_limits<double>::infinity();
  std::size_t ead_steps = 100;
  double ead_step = 0.1;
  double ead_beta = 0.1;
  double ead_kappa = 64.0;
  double ead_c = 1.0;
  std::size_t mimicry_candidates = 10;
  std::string mimicry_selection = "nearest";
};

void register_settings(CLI::App& app, Settings& s) {
  auto list = [&](const char* name, auto& target, const char* help) {
    std::ostringstream text;
    for (std::size_t i = 0; i < target.size(); ++i) text << (i ? "," : "") << target[i];
    app.add_option(name, target, help)->delimiter(',')->default_str(text.str());
  };
  auto one = [&](const char* name, auto& target, const char* help) {
    app.add_option(name, target, help)->capture_default_str();
  };
  one("--seed", s.seed, "Master seed; every random stream derives from it");
  one("--workers", s.workers, "Worker threads (0: ADVMAL_WORKERS, else 1)");
  one("--output_dir", s.output_dir, "Parent directory of run directories");

  one("--data_train", s.data_train, "Training set (sparse text); empty: synthetic");
  one("--data_validation", s.data_validation, "Validation set");
  one("--data_test", s.data_test, "Test set");
  one("--data_policy", s.data_policy, "Manipulation policy file");
  one("--data_dim", s.data_dim, "Synthetic feature dimension");
  list("--data_per_class", s.data_per_class, "Synthetic examples per class");
  one("--data_flip_noise", s.data_flip_noise, "Synthetic per-bit flip probability");
  one("--data_prototype_density", s.data_prototype_density, "Synthetic prototype density");
  one("--data_addition_fraction", s.data_addition_fraction, "Share of addable features");
  one("--data_removal_fraction", s.data_removal_fraction, "Share of removable features");
  list("--data_split", s.data_split, "Train/validation/test fractions");
  one("--positive_class", s.positive_class, "Malicious class label");

  list("--defenses", s.defenses,
       "Defense profiles: basic, binarization, at, ar, dae, at_dae, bin_ar, ensemble");
  list("--model_hidden", s.model_hidden, "Hidden layer widths");
  one("--model_activation", s.model_activation, "relu or elu");
  one("--train_epochs", s.train_epochs, "Training epochs");
  one("--train_batch_size", s.train_batch_size, "Mini-batch size");
  one("--train_lr", s.train_lr, "Adam learning rate");
  one("--train_oversample_ratio", s.train_oversample_ratio, "Oversampling floor (0: off)");
  one("--binarization_threshold", s.binarization_threshold, "Threshold for binarization");
  one("--perturbed_classes", s.perturbed_classes,
      "Classes the inner maximizer perturbs: comma list or 'all'");
  one("--dae_latent", s.dae_latent, "Autoencoder width (0: min(dim, 160))");
  one("--at_lr", s.at_lr, "Inner maximizer learning rate, adversarial training");
  one("--at_steps", s.at_steps, "Inner maximizer steps, adversarial training");
  one("--at_restarts", s.at_restarts, "Salt-and-pepper restarts, adversarial training");
  one("--at_noise_max", s.at_noise_max, "Largest restart noise ratio, adversarial training");
  one("--ar_lr", s.ar_lr, "Inner maximizer learning rate, adversarial regularization");
  one("--ar_steps", s.ar_steps, "Inner maximizer steps, adversarial regularization");
  one("--ar_restarts", s.ar_restarts, "Restarts, adversarial regularization");
  one("--ar_noise_max", s.ar_noise_max, "Largest restart noise ratio, adversarial regularization");
  one("--ensemble_size", s.ensemble_size, "Ensemble members");
  one("--ensemble_subspace", s.ensemble_subspace, "Feature fraction per member");
  one("--ensemble_data_fraction", s.ensemble_data_fraction, "Example fraction per member");
  one("--ensemble_base", s.ensemble_base, "Profile of each ensemble member");

  list("--attacks", s.attacks, "Attack names or 'all'");
  one("--attack_pool", s.attack_pool, "Cap on attacked test positives");
  one("--threat", s.threat, "grey-box or white-box");
  list("--surrogate_hidden", s.surrogate_hidden, "Surrogate hidden widths");
  one("--surrogate_epochs", s.surrogate_epochs, "Surrogate epochs");
  one("--surrogate_batch_size", s.surrogate_batch_size, "Surrogate mini-batch size");
  one("--surrogate_lr", s.surrogate_lr, "Surrogate learning rate");
  one("--iterative_steps", s.iterative_steps, "Budget of RANDOM, GROSSE, BGA, BCA");
  one("--fgsm_epsilon", s.fgsm_epsilon, "FGSM step");
  one("--pgd_steps", s.pgd_steps, "PGD iterations");
  one("--pgd_l1_step", s.pgd_l1_step, "PGD-L1 step");
  one("--pgd_l2_step", s.pgd_l2_step, "PGD-L2 step");
  one("--pgd_linf_step", s.pgd_linf_step, "PGD-LINF step");
  one("--pgd_adam_step", s.pgd_adam_step, "PGD-ADAM learning rate");
  one("--pgd_epsilon_ball", s.pgd_epsilon_ball, "PGD norm-ball radius (inf: none)");
  one("--ead_steps", s.ead_steps, "EAD iterations");
  one("--ead_step", s.ead_step, "EAD step size");
  one("--ead_beta", s.ead_beta, "EAD l1 weight");
  one("--ead_kappa", s.ead_kappa, "EAD confidence clamp");
  one("--ead_c", s.ead_c, "EAD loss weight");
  one("--mimicry_candidates", s.mimicry_candidates, "Benign guides tried by mimicry");
  one("--mimicry_selection", s.mimicry_selection, "nearest or random");
}

// Validated, typed form of the settings.
struct Plan {
  SyntheticSpec synthetic;
  std::array<double, 3> split{};
  std::vector<DefenseSpec> defenses;
  std::vector<AttackConfig> attacks;
  ThreatModel threat = ThreatModel::kGreyBox;
  SurrogateProfile surrogate;
  std::size_t workers = 1;
};

std::vector<int> parse_classes(const std::string& text) {
  if (text == "all") return {};
  std::vector<int> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("perturbed_classes: '" + tok + "' is not a class label");
    }
  }
  return out;
}

DefenseSpec make_defense(const Settings& s, const std::string& profile) {
  DefenseSpec spec;
  spec.name = profile;
  DefenseConfig& c = spec.config;
  c.hidden = s.model_hidden;
  c.activation = parse_activation(s.model_activation);
  c.epochs = s.train_epochs;
  c.batch_size = s.train_batch_size;
  c.learning_rate = s.train_lr;
  c.oversample_ratio = s.train_oversample_ratio;
  c.binarization_threshold = s.binarization_threshold;
  c.latent_dim = s.dae_latent;
  c.perturbed_classes = parse_classes(s.perturbed_classes);
  c.workers = s.workers;
  const InnerMaxConfig at{s.at_lr, s.at_steps, s.at_restarts, s.at_noise_max};
  const InnerMaxConfig ar{s.ar_lr, s.ar_steps, s.ar_restarts, s.ar_noise_max};

  const std::string base = profile == "ensemble" ? s.ensemble_base : profile;
  DefenseFlags& f = spec.flags;
  f = {false, false, false, true};
  c.inner = at;
  if (base == "basic") {
  } else if (base == "binarization") {
    f.use_binarization = true;
  } else if (base == "at") {
    f.adversarial = true;
  } else if (base == "ar") {
    f.adversarial = true;
    f.known_manipulation_set = false;
    c.inner = ar;
  } else if (base == "dae") {
    f.use_dae = true;
  } else if (base == "at_dae") {
    f.adversarial = true;
    f.use_dae = true;
  } else if (base == "bin_ar") {
    f.adversarial = true;
    f.use_binarization = true;
    f.known_manipulation_set = false;
    c.inner = ar;
  } else {
    throw ConfigError("unknown defense profile '" + base + "'");
  }
  if (profile == "ensemble") {
    c.ensemble_size = s.ensemble_size;
    c.subspace_ratio = s.ensemble_subspace;
    c.data_fraction = s.ensemble_data_fraction;
  }
  c.validate();
  return spec;
}

AttackConfig make_attack(const Settings& s, AttackKind kind) {
  AttackConfig a = AttackConfig::defaults(kind);
  switch (kind) {
    case AttackKind::kRandom:
    case AttackKind::kGrosse:
    case AttackKind::kBga:
    case AttackKind::kBca: a.max_steps = s.iterative_steps; break;
    case AttackKind::kMimicry:
      a.mimicry_candidates = s.mimicry_candidates;
      if (s.mimicry_selection == "nearest")
        a.mimicry_selection = MimicrySelection::kNearest;
      else if (s.mimicry_selection == "random")
        a.mimicry_selection = MimicrySelection::kRandom;
      else
        throw ConfigError("mimicry_selection must be 'nearest' or 'random'");
      break;
    case AttackKind::kFgsm: a.step_size = s.fgsm_epsilon; break;
    case AttackKind::kPgdL1: a.step_size = s.pgd_l1_step; break;
    case AttackKind::kPgdL2: a.step_size = s.pgd_l2_step; break;
    case AttackKind::kPgdLinf: a.step_size = s.pgd_linf_step; break;
    case AttackKind::kPgdAdam: a.step_size = s.pgd_adam_step; break;
    case AttackKind::kEad:
      a.max_steps = s.ead_steps;
      a.step_size = s.ead_step;
      a.ead_beta = s.ead_beta;
      a.ead_kappa = s.ead_kappa;
      a.ead_c = s.ead_c;
      break;
  }
  if (kind == AttackKind::kPgdL1 || kind == AttackKind::kPgdL2 || kind == AttackKind::kPgdLinf ||
      kind == AttackKind::kPgdAdam) {
    a.max_steps = s.pgd_steps;
    a.epsilon_ball = s.pgd_epsilon_ball;
  }
  if (!(a.step_size > 0.0)) throw ConfigError("attack step sizes must be positive");
  return a;
}

Plan make_plan(const Settings& s) {
  Plan p;
  p.synthetic.dim = s.data_dim;
  p.synthetic.per_class = s.data_per_class;
  p.synthetic.classes = static_cast<int>(s.data_per_class.size());
  p.synthetic.flip_noise = s.data_flip_noise;
  p.synthetic.prototype_density = s.data_prototype_density;
  p.synthetic.addition_fraction = s.data_addition_fraction;
  p.synthetic.removal_fraction = s.data_removal_fraction;
  p.synthetic.seed = derive_seed(s.seed, 1);
  if (s.data_split.size() != 3) throw ConfigError("data_split needs three fractions");
  std::copy(s.data_split.begin(), s.data_split.end(), p.split.begin());

  std::set<std::string> seen;
  for (const std::string& name : s.defenses) {
    if (!seen.insert(name).second) throw ConfigError("defense '" + name + "' listed twice");
    p.defenses.push_back(make_defense(s, name));
  }
  std::vector<AttackKind> kinds;
  for (const std::string& name : s.attacks) {
    if (name == "all") {
      const auto all = all_attacks();
      kinds.insert(kinds.end(), all.begin(), all.end());
    } else if (name == "none") {
    } else if (auto k = parse_attack(name)) {
      kinds.push_back(*k);
    } else {
      throw ConfigError("unknown attack '" + name + "'");
    }
  }
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    p.attacks.push_back(make_attack(s, kinds[j]));
    p.attacks.back().seed = derive_seed(s.seed, 40 + j);
  }
  const auto threat = parse_threat_model(s.threat);
  if (!threat) throw ConfigError("threat must be 'grey-box' or 'white-box'");
  p.threat = *threat;
  p.surrogate = {s.surrogate_hidden, Activation::kRelu, s.surrogate_epochs,
                 s.surrogate_batch_size, s.surrogate_lr};
  p.workers = resolve_workers(s.workers);
  for (auto& d : p.defenses) d.config.workers = p.workers;
  if (s.positive_class < 0) throw ConfigError("positive_class must be nonnegative");
  for (const std::string* path : {&s.data_train, &s.data_validation, &s.data_test, &s.data_policy})
    if (!path->empty() && !fs::exists(*path))
      throw std::runtime_error("input file '" + *path + "' does not exist");
  if (!s.data_train.empty() && (s.data_test.empty() || s.data_policy.empty()))
    throw ConfigError("data_train needs data_test and data_policy as well");
  return p;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Resolved configuration, one "key = value" line per setting in
// registration order. It is both the hashed text and the saved config.ini.
std::string canonical_config(const CLI::App& app) {
  std::ostringstream out;
  for (const CLI::Option* opt : app.get_options()) {
    const std::string key = opt->get_single_name();
    if (key == "help" || key == "config" || key == "run_dir") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    out << key << " = \"" << value << "\"\n";
  }
  return out.str();
}

fs::path make_run_dir(const Settings& s, const std::string& config_text,
                      const std::string& requested) {
  fs::path dir;
  if (!requested.empty()) {
    dir = requested;
  } else {
    std::ostringstream name;
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    name << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config_text) << '-'
         << std::put_time(&utc, "%Y%m%dT%H%M%SZ");
    dir = fs::path(s.output_dir) / name.str();
    for (int n = 1; fs::exists(dir); ++n)
      dir = fs::path(s.output_dir) / (name.str() + "-" + std::to_string(n));
  }
  fs::create_directories(dir);
  std::ofstream(dir / "config.ini", std::ios::binary) << config_text;
  return dir;
}

struct Data {
  Dataset train;
  Dataset validation;
  Dataset test;
  ManipulationPolicy policy;
};

void write_data(const fs::path& dir, const Data& d) {
  fs::create_directories(dir);
  write_sparse(dir / "train.txt", d.train);
  write_sparse(dir / "validation.txt", d.validation);
  write_sparse(dir / "test.txt", d.test);
  write_policy(dir / "policy.txt", d.policy);
}

Data generate(const Plan& plan, const Settings& s) {
  SyntheticData syn = generate_synthetic(plan.synthetic);
  DatasetSplit parts = split(syn.data, plan.split, derive_seed(s.seed, 2));
  return {std::move(parts.train), std::move(parts.validation), std::move(parts.test),
          std::move(syn.policy)};
}

// Explicit files win; then data already in the run directory; otherwise the
// synthetic generator runs and its output is stored in the run directory.
Data load_data(const Plan& plan, const Settings& s, const fs::path& run_dir) {
  if (!s.data_train.empty()) {
    Data d;
    d.train = read_sparse(s.data_train);
    d.test = read_sparse(s.data_test, d.train.dim, d.train.class_count);
    if (!s.data_validation.empty())
      d.validation = read_sparse(s.data_validation, d.train.dim, d.train.class_count);
    d.policy = read_policy(s.data_policy, d.train.dim);
    return d;
  }
  const fs::path dir = run_dir / "data";
  if (fs::exists(dir / "train.txt")) {
    Data d;
    d.train = read_sparse(dir / "train.txt");
    d.validation = read_sparse(dir / "validation.txt", d.train.dim, d.train.class_count);
    d.test = read_sparse(dir / "test.txt", d.train.dim, d.train.class_count);
    d.policy = read_policy(dir / "policy.txt", d.train.dim);
    return d;
  }
  Data d = generate(plan, s);
  write_data(dir, d);
  return d;
}

void print_summary(std::ostream& out, const Data& d) {
  auto counts = [](const Dataset& ds) {
    std::ostringstream o;
    const auto c = ds.class_counts();
    for (std::size_t k = 0; k < c.size(); ++k) o << (k ? "," : "") << c[k];
    return o.str();
  };
  out << "dim=" << d.train.dim << " classes=" << d.train.class_count
      << " train=" << counts(d.train) << " validation=" << counts(d.validation)
      << " test=" << counts(d.test) << '\n';
}

fs::path model_path(const fs::path& run_dir, const std::string& name) {
  return run_dir / "models" / (name + ".json");
}

void check_dims(const Classifier& model, const Dataset& data, const std::string& name) {
  if (model.input_dim() != data.dim || model.class_count() != static_cast<std::size_t>(data.class_count))
    throw VersionError("checkpoint '" + name + "' expects " + std::to_string(model.input_dim()) +
                       " features and " + std::to_string(model.class_count()) +
                       " classes, but the dataset has " + std::to_string(data.dim) + " and " +
                       std::to_string(data.class_count));
}

struct LoadedModels {
  std::vector<std::unique_ptr<Classifier>> owned;
  std::vector<NamedClassifier> named;
  std::unique_ptr<Classifier> surrogate;
};

LoadedModels load_models(const Plan& plan, const fs::path& run_dir, const Dataset& data,
                         bool need_surrogate) {
  LoadedModels m;
  for (const DefenseSpec& spec : plan.defenses) {
    const fs::path path = model_path(run_dir, spec.name);
    if (!fs::exists(path))
      throw std::runtime_error("missing checkpoint '" + path.string() + "'; run 'train' first");
    m.owned.push_back(load_classifier(path));
    check_dims(*m.owned.back(), data, spec.name);
    m.named.push_back({spec.name, m.owned.back().get()});
  }
  if (need_surrogate) {
    const fs::path path = model_path(run_dir, "surrogate");
    if (!fs::exists(path))
      throw std::runtime_error("grey-box attacks need a surrogate checkpoint at '" +
                               path.string() + "'");
    m.surrogate = load_classifier(path);
    check_dims(*m.surrogate, data, "surrogate");
  }
  return m;
}

int cmd_gen(const Plan& plan, const Settings& s, const fs::path& run_dir) {
  const Data d = generate(plan, s);
  write_data(run_dir / "data", d);
  print_summary(std::cout, d);
  return kExitOk;
}

int cmd_train(const Plan& plan, const Settings& s, const fs::path& run_dir) {
  const Data d = load_data(plan, s, run_dir);
  print_summary(std::cout, d);
  fs::create_directories(run_dir / "models");
  fs::create_directories(run_dir / "logs");
  std::ofstream log(run_dir / "logs" / "train_trace.txt", std::ios::binary);
  log << "model epoch classifier_loss dae_loss\n";
  auto write_trace = [&](const std::string& name, const HardenedTrace& t) {
    for (std::size_t e = 0; e < t.epoch_classifier_loss.size(); ++e) {
      log << name << ' ' << e + 1 << ' ' << t.epoch_classifier_loss[e] << ' ';
      if (e < t.epoch_dae_loss.size())
        log << t.epoch_dae_loss[e];
      else
        log << '-';
      log << '\n';
    }
  };

  for (std::size_t i = 0; i < plan.defenses.size(); ++i) {
    DefenseSpec spec = plan.defenses[i];
    spec.config.seed = derive_seed(s.seed, 20 + i);
    const fs::path path = model_path(run_dir, spec.name);
    if (spec.config.ensemble_size > 1) {
      std::vector<HardenedTrace> traces;
      const EnsembleClassifier e = train_ensemble(d.train, &d.policy, spec.config, spec.flags, &traces);
      save_ensemble(path, e, spec.config.subspace_ratio);
      for (std::size_t m = 0; m < traces.size(); ++m)
        write_trace(spec.name + "#" + std::to_string(m), traces[m]);
    } else {
      HardenedTrace trace;
      save_hardened(path, train_hardened(d.train, &d.policy, spec.config, spec.flags, &trace));
      write_trace(spec.name, trace);
    }
    std::cout << "trained " << spec.name << " -> " << path.string() << '\n';
  }
  if (plan.threat == ThreatModel::kGreyBox) {
    const Mlp surrogate = train_surrogate(d.train, plan.surrogate, derive_seed(s.seed, 11));
    save_mlp(model_path(run_dir, "surrogate"), surrogate);
    std::cout << "trained surrogate -> " << model_path(run_dir, "surrogate").string() << '\n';
  }
  return kExitOk;
}

int cmd_attack(const Plan& plan, const Settings& s, const fs::path& run_dir) {
  const Data d = load_data(plan, s, run_dir);
  const bool grey = plan.threat == ThreatModel::kGreyBox && !plan.attacks.empty();
  LoadedModels models = load_models(plan, run_dir, d.test, grey);
  const std::vector<std::size_t> pool =
      select_attack_pool(d.test, s.positive_class, s.attack_pool, derive_seed(s.seed, 10));
  std::vector<FeatureVector> xs;
  std::vector<int> ys;
  for (std::size_t i : pool) {
    xs.push_back(d.test.examples[i]);
    ys.push_back(d.test.labels[i]);
  }
  std::vector<FeatureVector> benign;
  for (std::size_t i = 0; i < d.train.size(); ++i)
    if (d.train.labels[i] != s.positive_class) benign.push_back(d.train.examples[i]);

  fs::create_directories(run_dir / "attacks");
  for (const NamedClassifier& named : models.named) {
    const auto runs = run_attack_suite(*named.model, models.surrogate.get(), plan.threat, xs, ys,
                                       d.policy, benign, plan.attacks, plan.workers);
    const fs::path out = run_dir / "attacks" / (named.name + ".csv");
    std::ofstream f(out, std::ios::binary);
    write_attack_table(f, runs, pool);
    std::cout << "attacked " << named.name << " (" << pool.size() << " examples x "
              << plan.attacks.size() << " attacks) -> " << out.string() << '\n';
  }
  return kExitOk;
}

int cmd_evaluate(const Plan& plan, const Settings& s, const fs::path& run_dir) {
  const Data d = load_data(plan, s, run_dir);
  const bool grey = plan.threat == ThreatModel::kGreyBox && !plan.attacks.empty();
  LoadedModels models = load_models(plan, run_dir, d.test, grey);
  EvaluationReport report =
      evaluate_models(models.named, models.surrogate.get(), d.train, d.test, d.policy,
                      plan.attacks, plan.threat, s.attack_pool, s.positive_class, s.seed,
                      plan.workers);
  for (std::size_t i = 0; i < plan.defenses.size(); ++i) {
    report.specs.push_back(plan.defenses[i]);
    report.specs.back().config.seed = derive_seed(s.seed, 20 + i);
  }
  if (grey) report.surrogate = plan.surrogate;
  fs::create_directories(run_dir / "reports");
  std::ofstream(run_dir / "reports" / "report.json", std::ios::binary) << report_to_json(report);
  const std::string table = report_table(report);
  std::ofstream(run_dir / "reports" / "table.txt", std::ios::binary) << table;
  std::cout << table;
  return kExitOk;
}

int cmd_report(const fs::path& run_dir) {
  const fs::path path = run_dir / "reports" / "report.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("no report at '" + path.string() + "'; run 'evaluate' first");
  const nlohmann::json j = nlohmann::json::parse(in);
  std::cout << "threat model: " << j.at("threat_model").get<std::string>()
            << ", attacked pool: " << j.at("pool_size").get<std::size_t>() << " examples\n";
  std::cout << "defense accuracy fnr fpr macro_f1 harmonic_mean\n";
  for (const auto& d : j.at("defenses")) {
    const auto& c = d.at("clean");
    std::cout << d.at("name").get<std::string>() << ' ' << c.at("accuracy").get<double>() << ' '
              << c.at("fnr").get<double>() << ' ' << c.at("fpr").get<double>() << ' '
              << c.at("macro_f1").get<double>() << ' '
              << (d.at("harmonic_mean").is_null() ? std::string("-")
                                                  : d.at("harmonic_mean").dump())
              << '\n';
  }
  std::ifstream table(run_dir / "reports" / "table.txt", std::ios::binary);
  if (table) std::cout << '\n' << table.rdbuf();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Evasion attacks and hardened classifiers for binary feature vectors", "advmal"};
  Settings settings;
  std::string run_dir_flag;
  app.set_config("--config", "", "Configuration file (key = value lines)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  register_settings(app, settings);
  app.add_option("--run_dir,--run-dir", run_dir_flag,
                 "Run directory to use (default: <output_dir>/<config hash>-<UTC time>)");
  std::string command;
  for (const char* name : {"gen", "train", "attack", "evaluate", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
  }
  app.get_subcommand("gen")->description("Generate a synthetic dataset and policy");
  app.get_subcommand("train")->description("Train the configured defenses (and surrogate)");
  app.get_subcommand("attack")->description("Run the attack suite and write per-example tables");
  app.get_subcommand("evaluate")->description("Attack every defense and write the report");
  app.get_subcommand("report")->description("Print the report of a finished run");
  app.require_subcommand(1);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (command == "report") {
      if (run_dir_flag.empty()) throw ConfigError("report needs --run-dir");
      return cmd_report(run_dir_flag);
    }
    const Plan plan = make_plan(settings);
    const fs::path run_dir = make_run_dir(settings, canonical_config(app), run_dir_flag);
    std::cout << "run directory: " << run_dir.string() << '\n';
    if (command == "gen") return cmd_gen(plan, settings, run_dir);
    if (command == "train") return cmd_train(plan, settings, run_dir);
    if (command == "attack") return cmd_attack(plan, settings, run_dir);
    return cmd_evaluate(plan, settings, run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const VersionError& e) {
    std::cerr << "mismatch: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace advmal::cli
