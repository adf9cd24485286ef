#include "advmal/attacks.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "advmal/random.hpp"

namespace advmal {

namespace {

constexpr std::array<std::string_view, kAttackKindCount> kNames = {
    "RANDOM", "MIMICRY", "FGSM", "GROSSE", "BGA", "BCA",
    "PGD_L1", "PGD_L2",  "PGD_LINF", "PGD_ADAM", "EAD",
};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_input(const AttackContext& ctx, std::span<const double> x, int y) {
  if (x.size() != ctx.policy.dim())
    throw ShapeError("attack: example has dimension " + std::to_string(x.size()) +
                     " but the policy covers " + std::to_string(ctx.policy.dim()));
  if (x.size() != ctx.attacker.input_dim() || x.size() != ctx.victim.input_dim())
    throw ShapeError("attack: example dimension does not match the models");
  if (y < 0 || static_cast<std::size_t>(y) >= ctx.victim.class_count())
    throw std::out_of_range("attack: label " + std::to_string(y) + " out of range");
}

bool evades(const Classifier& model, std::span<const double> point, int y) {
  return model.predict(point) != y;
}

AttackOutcome finish(const AttackContext& ctx, std::span<const double> x, int y,
                     FeatureVector x_adv, std::size_t steps) {
  AttackOutcome out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x_adv[i] - x[i]);
    if (d != 0.0) ++out.flips;
    out.l1 += d;
    out.l2 += d * d;
    out.linf = std::max(out.linf, d);
  }
  out.l2 = std::sqrt(out.l2);
  out.success = evades(ctx.victim, x_adv, y);
  out.steps_used = steps;
  out.x_adv = std::move(x_adv);
  return out;
}

// A gradient attack never hands back a point its own model scores as less
// adversarial than the start; rounding and non-linearity can otherwise do so.
FeatureVector keep_if_not_worse(const AttackContext& ctx, std::span<const double> x, int y,
                                FeatureVector x_adv) {
  if (evades(ctx.attacker, x_adv, y)) return x_adv;
  if (ctx.attacker.loss(x_adv, y) < ctx.attacker.loss(x, y))
    return FeatureVector(x.begin(), x.end());
  return x_adv;
}

// Grosse and BCA share one rule: flip the addition-allowed zero feature with
// the largest positive loss gradient, one feature per step.
AttackOutcome single_flip_ascent(const AttackContext& ctx, std::span<const double> x, int y,
                                 const AttackConfig& config) {
  check_input(ctx, x, y);
  FeatureVector cur(x.begin(), x.end());
  std::size_t steps = 0;
  for (; steps < config.max_steps; ++steps) {
    if (config.early_stop && evades(ctx.attacker, cur, y)) break;
    const std::vector<double> g = ctx.attacker.loss_gradient(cur, y);
    std::size_t best = cur.size();
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] != 0.0 || !ctx.policy.addition_allowed[i] || !(g[i] > 0.0)) continue;
      if (best == cur.size() || g[i] > g[best]) best = i;
    }
    if (best == cur.size()) break;
    cur[best] = 1.0;
  }
  return finish(ctx, x, y, keep_if_not_worse(ctx, x, y, std::move(cur)), steps);
}

}  // namespace

std::string_view attack_name(AttackKind kind) { return kNames.at(static_cast<std::size_t>(kind)); }

std::optional<AttackKind> parse_attack(std::string_view name) {
  std::string norm;
  for (char c : name) norm.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(c)));
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == norm) return static_cast<AttackKind>(i);
  return std::nullopt;
}

std::vector<AttackKind> all_attacks() {
  std::vector<AttackKind> out;
  for (std::size_t i = 0; i < kAttackKindCount; ++i) out.push_back(static_cast<AttackKind>(i));
  return out;
}

AttackConfig AttackConfig::defaults(AttackKind kind) {
  AttackConfig c;
  c.kind = kind;
  switch (kind) {
    case AttackKind::kRandom:
    case AttackKind::kGrosse:
    case AttackKind::kBga:
    case AttackKind::kBca:
      c.max_steps = 100;
      c.step_size = 1.0;
      break;
    case AttackKind::kMimicry:
      c.max_steps = 1;
      c.step_size = 1.0;
      break;
    case AttackKind::kFgsm:
      c.max_steps = 1;
      c.step_size = 1.0;
      break;
    case AttackKind::kPgdL1:
    case AttackKind::kPgdL2:
      c.max_steps = 100;
      c.step_size = 1.0;
      break;
    case AttackKind::kPgdLinf:
    case AttackKind::kPgdAdam:
      c.max_steps = 100;
      c.step_size = 0.01;
      break;
    case AttackKind::kEad:
      c.max_steps = 100;
      c.step_size = 0.1;
      break;
  }
  return c;
}

FeasibleBox FeasibleBox::from(std::span<const double> x, const ManipulationPolicy& policy) {
  if (x.size() != policy.dim()) throw ShapeError("feasible box: policy dimension mismatch");
  FeasibleBox box;
  box.lower.resize(x.size());
  box.upper.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool free = policy.can_flip(i, x[i]);
    box.lower[i] = x[i] < 0.5 ? 0.0 : (free ? 0.0 : 1.0);
    box.upper[i] = x[i] < 0.5 ? (free ? 1.0 : 0.0) : 1.0;
  }
  return box;
}

void FeasibleBox::clip(std::span<double> point) const {
  for (std::size_t i = 0; i < point.size(); ++i)
    point[i] = std::clamp(point[i], lower[i], upper[i]);
}

void FeasibleBox::mask_ascent(std::span<const double> point, std::span<double> grad) const {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if ((grad[i] > 0.0 && point[i] >= upper[i]) || (grad[i] < 0.0 && point[i] <= lower[i]))
      grad[i] = 0.0;
}

void project_l1_ball(std::span<double> v, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("l1 ball radius must be nonnegative");
  double norm = 0.0;
  for (double a : v) norm += std::abs(a);
  if (norm <= radius) return;
  std::vector<double> u(v.size());
  std::transform(v.begin(), v.end(), u.begin(), [](double a) { return std::abs(a); });
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - radius) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (double& a : v) a = sign(a) * std::max(std::abs(a) - theta, 0.0);
}

AttackOutcome random_attack(const AttackContext& ctx, std::span<const double> x, int y,
                            const AttackConfig& config) {
  check_input(ctx, x, y);
  Rng rng(config.seed);
  FeatureVector cur(x.begin(), x.end());
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (ctx.policy.can_flip(i, x[i])) candidates.push_back(i);
  std::size_t steps = 0;
  for (; steps < config.max_steps && !candidates.empty(); ++steps) {
    if (config.early_stop && evades(ctx.attacker, cur, y)) break;
    const std::size_t k = uniform_index(rng, candidates.size());
    cur[candidates[k]] = 1.0 - cur[candidates[k]];
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return finish(ctx, x, y, std::move(cur), steps);
}

AttackOutcome mimicry_attack(const AttackContext& ctx, std::span<const double> x, int y,
                             const AttackConfig& config) {
  check_input(ctx, x, y);
  const auto pool = ctx.benign_pool;
  if (pool.empty()) throw std::invalid_argument("mimicry: benign pool is empty");
  if (config.mimicry_candidates == 0)
    throw std::invalid_argument("mimicry: needs at least one candidate");
  const std::size_t k = std::min(config.mimicry_candidates, pool.size());

  std::vector<std::size_t> chosen;
  if (config.mimicry_selection == MimicrySelection::kRandom) {
    Rng rng(config.seed);
    chosen = sample_without_replacement(rng, pool.size(), k);
  } else {
    std::vector<double> dist(pool.size(), 0.0);
    for (std::size_t p = 0; p < pool.size(); ++p) {
      if (pool[p].size() != x.size()) throw ShapeError("mimicry: pool vector dimension mismatch");
      for (std::size_t i = 0; i < x.size(); ++i) dist[p] += std::abs(pool[p][i] - x[i]);
    }
    chosen.resize(pool.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    std::stable_sort(chosen.begin(), chosen.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    chosen.resize(k);
  }

  FeatureVector best_success;
  std::size_t best_success_l1 = 0;
  FeatureVector best_any;
  std::size_t best_any_l1 = 0;
  for (std::size_t p : chosen) {
    FeatureVector cand = project_to_m(x, pool[p], ctx.policy);
    std::size_t l1 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) l1 += cand[i] != x[i] ? 1 : 0;
    if (evades(ctx.attacker, cand, y)) {
      if (best_success.empty() || l1 < best_success_l1) {
        best_success = cand;
        best_success_l1 = l1;
      }
    } else if (best_any.empty() || l1 < best_any_l1) {
      best_any = std::move(cand);
      best_any_l1 = l1;
    }
  }
  return finish(ctx, x, y, best_success.empty() ? std::move(best_any) : std::move(best_success),
                chosen.size());
}

AttackOutcome fgsm(const AttackContext& ctx, std::span<const double> x, int y,
                   const AttackConfig& config) {
  check_input(ctx, x, y);
  if (config.max_steps == 0) return finish(ctx, x, y, FeatureVector(x.begin(), x.end()), 0);
  const std::vector<double> g = ctx.attacker.loss_gradient(x, y);
  std::vector<double> moved(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    moved[i] = std::clamp(x[i] + config.step_size * sign(g[i]), 0.0, 1.0);
  return finish(ctx, x, y, keep_if_not_worse(ctx, x, y, project_to_m(x, moved, ctx.policy)), 1);
}

AttackOutcome grosse(const AttackContext& ctx, std::span<const double> x, int y,
                     const AttackConfig& config) {
  return single_flip_ascent(ctx, x, y, config);
}

AttackOutcome bca(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config) {
  return single_flip_ascent(ctx, x, y, config);
}

AttackOutcome bga(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config) {
  check_input(ctx, x, y);
  FeatureVector cur(x.begin(), x.end());
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  std::size_t steps = 0;
  for (; steps < config.max_steps; ++steps) {
    if (config.early_stop && evades(ctx.attacker, cur, y)) break;
    const std::vector<double> g = ctx.attacker.loss_gradient(cur, y);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    const double threshold = scale * std::sqrt(norm);
    bool flipped = false;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] == 0.0 && ctx.policy.addition_allowed[i] && g[i] > 0.0 && g[i] >= threshold) {
        cur[i] = 1.0;
        flipped = true;
      }
    }
    if (!flipped) break;
  }
  return finish(ctx, x, y, keep_if_not_worse(ctx, x, y, std::move(cur)), steps);
}

AttackOutcome pgd(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config) {
  check_input(ctx, x, y);
  const AttackKind kind = config.kind;
  if (kind != AttackKind::kPgdL1 && kind != AttackKind::kPgdL2 && kind != AttackKind::kPgdLinf &&
      kind != AttackKind::kPgdAdam)
    throw std::invalid_argument("pgd: config.kind is not a PGD variant");
  if (!(config.step_size > 0.0)) throw std::invalid_argument("pgd: step size must be positive");

  const std::size_t dim = x.size();
  const FeasibleBox box = FeasibleBox::from(x, ctx.policy);
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> delta(dim, 0.0);
  AdamState adam(dim, config.step_size);
  const double alpha = config.step_size;
  const bool ball = std::isfinite(config.epsilon_ball) && kind != AttackKind::kPgdAdam;

  std::size_t steps = 0;
  for (; steps < config.max_steps; ++steps) {
    if (config.early_stop && evades(ctx.attacker, project_to_m(x, point, ctx.policy), y)) break;
    std::vector<double> g = ctx.attacker.loss_gradient(point, y);
    box.mask_ascent(point, g);
    switch (kind) {
      case AttackKind::kPgdLinf:
        for (std::size_t i = 0; i < dim; ++i) delta[i] += alpha * sign(g[i]);
        break;
      case AttackKind::kPgdL2: {
        double norm = 0.0;
        for (double v : g) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
          for (std::size_t i = 0; i < dim; ++i) delta[i] += alpha * g[i] / norm;
        break;
      }
      case AttackKind::kPgdL1: {
        std::size_t j = 0;
        for (std::size_t i = 1; i < dim; ++i)
          if (std::abs(g[i]) > std::abs(g[j])) j = i;
        if (dim > 0) delta[j] += alpha * sign(g[j]);
        break;
      }
      default:
        adam_step(adam, delta, g, Direction::kMaximize);
        break;
    }
    for (std::size_t i = 0; i < dim; ++i) point[i] = x[i] + delta[i];
    box.clip(point);
    for (std::size_t i = 0; i < dim; ++i) delta[i] = point[i] - x[i];
    if (ball) {
      if (kind == AttackKind::kPgdLinf) {
        for (double& d : delta) d = std::clamp(d, -config.epsilon_ball, config.epsilon_ball);
      } else if (kind == AttackKind::kPgdL2) {
        double norm = 0.0;
        for (double d : delta) norm += d * d;
        norm = std::sqrt(norm);
        if (norm > config.epsilon_ball)
          for (double& d : delta) d *= config.epsilon_ball / norm;
      } else {
        project_l1_ball(delta, config.epsilon_ball);
      }
      for (std::size_t i = 0; i < dim; ++i) point[i] = x[i] + delta[i];
    }
  }
  AttackOutcome out =
      finish(ctx, x, y, keep_if_not_worse(ctx, x, y, project_to_m(x, point, ctx.policy)), steps);
  out.continuous = std::move(point);
  return out;
}

AttackOutcome ead(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config) {
  check_input(ctx, x, y);
  if (!(config.step_size > 0.0)) throw std::invalid_argument("ead: step size must be positive");
  const std::size_t dim = x.size();
  const auto label = static_cast<std::size_t>(y);
  const FeasibleBox box = FeasibleBox::from(x, ctx.policy);
  const double alpha = config.step_size;
  const double shrink = alpha * config.ead_beta;

  // Gradient of c * max(z_y - max_{j != y} z_j, -kappa) w.r.t. the logits.
  const LogitGradientFn margin_grad = [&](std::span<const double> z) {
    std::vector<double> up(z.size(), 0.0);
    std::size_t rival = label == 0 ? 1 : 0;
    for (std::size_t j = 0; j < z.size(); ++j)
      if (j != label && z[j] > z[rival]) rival = j;
    if (z[label] - z[rival] > -config.ead_kappa) {
      up[label] = config.ead_c;
      up[rival] = -config.ead_c;
    }
    return up;
  };

  std::vector<double> point(x.begin(), x.end());
  std::vector<double> delta(dim, 0.0);
  std::size_t steps = 0;
  for (; steps < config.max_steps; ++steps) {
    if (config.early_stop && evades(ctx.attacker, project_to_m(x, point, ctx.policy), y)) break;
    const std::vector<double> g = ctx.attacker.input_gradient(point, margin_grad);
    for (std::size_t i = 0; i < dim; ++i) {
      const double z = delta[i] - alpha * (g[i] + 2.0 * delta[i]);
      delta[i] = sign(z) * std::max(std::abs(z) - shrink, 0.0);
      point[i] = x[i] + delta[i];
    }
    box.clip(point);
    for (std::size_t i = 0; i < dim; ++i) delta[i] = point[i] - x[i];
  }
  AttackOutcome out =
      finish(ctx, x, y, keep_if_not_worse(ctx, x, y, project_to_m(x, point, ctx.policy)), steps);
  out.continuous = std::move(point);
  return out;
}

AttackOutcome run_attack(const AttackContext& ctx, std::span<const double> x, int y,
                         const AttackConfig& config) {
  switch (config.kind) {
    case AttackKind::kRandom: return random_attack(ctx, x, y, config);
    case AttackKind::kMimicry: return mimicry_attack(ctx, x, y, config);
    case AttackKind::kFgsm: return fgsm(ctx, x, y, config);
    case AttackKind::kGrosse: return grosse(ctx, x, y, config);
    case AttackKind::kBga: return bga(ctx, x, y, config);
    case AttackKind::kBca: return bca(ctx, x, y, config);
    case AttackKind::kPgdL1:
    case AttackKind::kPgdL2:
    case AttackKind::kPgdLinf:
    case AttackKind::kPgdAdam: return pgd(ctx, x, y, config);
    case AttackKind::kEad: return ead(ctx, x, y, config);
  }
  throw std::invalid_argument("unknown attack kind");
}

}  // namespace advmal
