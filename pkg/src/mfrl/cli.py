"""Command line experiment runner.

Usage: ``mfrl <command> <config.ini>`` with command one of ``oracle``,
``mfq``, ``ddpg``, ``evaluate``, ``acceptance`` and ``bound``.  Exit codes:
0 success, 1 configuration error, 2 numerical failure, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import acceptance, analysis
from .config import ConfigError, ExperimentConfig, load_config
from .ddpg import LOG_COLUMNS, DdpgConfig, actor_policy, ddpg_train, rollout
from .dp import evaluate_policy, exact_q, grid_policy, projected_mdp, value_iteration
from .envs import make_env, periodic_gaussian, swarm_optimal_control, swarm_stationary_density
from .errors import MFRLError, NumericalError
from .io import config_hash, derive_rng, load_qtable, metadata, save_qtable, write_csv
from .mfq import mfq_train
from .neural import load_mlp, save_mlp
from .simplex import enumerate_action_profiles, enumerate_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3
CYBER_COLUMNS = ("t", "mu_DI", "mu_DS", "mu_UI", "mu_US")


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    return metadata(config_hash(cfg.text), cfg.seed, **extra)


def _make_env(cfg: ExperimentConfig):
    return make_env(cfg.env_kind(), **{k: v for k, v in cfg.section("env").items() if k != "kind"})


def _finite_env(cfg: ExperimentConfig):
    env = _make_env(cfg)
    if not env.finite:
        raise ConfigError(f"{cfg.path}: command needs a finite-state environment, got {env.kind!r}")
    return env


def run_oracle(cfg: ExperimentConfig) -> list:
    s = cfg.section("oracle")
    env = _finite_env(cfg)
    grid = enumerate_grid(env.n_states, s["resolution"])
    mdp = projected_mdp(env, grid, env.noise_panel(s["noise_nodes"]))
    q = exact_q(mdp, gamma=s["gamma"], tol=s["tol"])
    v = value_iteration(mdp, gamma=s["gamma"], tol=s["tol"])
    out = cfg.output_dir
    meta = _meta(cfg, command="oracle")
    files = list(save_qtable(out / "oracle_q", q.values, dimension=grid.dimension, resolution=grid.resolution,
                             gamma=s["gamma"], points=grid.points, meta=meta))
    header = ["grid_index", *[f"mu_{i}" for i in range(grid.dimension)], "value"]
    files.append(write_csv(out / "oracle_v.csv", header, [[g, *grid[g], v.values[g]] for g in range(len(grid))], meta))
    summary = [
        ("grid_size", len(grid)),
        ("action_profiles", len(mdp.profiles)),
        ("q_sweeps", q.sweeps),
        ("q_residual", q.residual),
        ("v_sweeps", v.sweeps),
        ("v_residual", v.residual),
    ]
    files.append(write_csv(out / "oracle_summary.csv", ("quantity", "value"), summary, meta))
    return files


def run_mfq(cfg: ExperimentConfig) -> list:
    s = cfg.section("mfq")
    env = _finite_env(cfg)
    grid = enumerate_grid(env.n_states, s["resolution"])
    reference = None
    if s["oracle_file"]:
        path = Path(s["oracle_file"])
        if not path.with_suffix(".bin").exists():
            raise ConfigError(f"{cfg.path}: oracle_file {path.with_suffix('.bin')} does not exist")
        stored = load_qtable(path)
        if (stored.dimension, stored.resolution) != (grid.dimension, grid.resolution):
            raise ConfigError(f"{cfg.path}: oracle_file was computed on a different lattice")
        reference = stored.values
    rng = derive_rng(cfg.seed, "mfq")
    table = mfq_train(env, grid, s["gamma"], s["kappa"], s["episodes"], s["sweep_order"], rng,
                      in_place=s["in_place"], reference=reference)
    out = cfg.output_dir
    meta = _meta(cfg, command="mfq")
    files = list(save_qtable(out / "mfq_q", table.values, dimension=grid.dimension, resolution=grid.resolution,
                             gamma=s["gamma"], kappa=s["kappa"], episodes=table.episode,
                             counts=table.visit_counts, points=grid.points, meta=meta))
    rows = [(ep, err, td) for ep, td, err in table.history]
    files.append(write_csv(out / "mfq_learning_curve.csv", ("episode", "sup_error_vs_oracle", "mean_td_magnitude"), rows, meta))
    return files


def ddpg_config(cfg: ExperimentConfig) -> DdpgConfig:
    s = cfg.section("ddpg")
    keys = ("n_episodes", "episode_length", "minibatch", "tau", "gamma", "action_noise_std", "actor_lr", "critic_lr",
            "buffer_capacity", "buffer_reset_per_episode", "hidden", "reward_scale", "updates_per_step")
    try:
        return DdpgConfig(**{k: s[k] for k in keys})
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: [ddpg] {exc}") from exc


def _swarm_profiles(env, actor, episode: int, out: Path, steps: int, meta: dict) -> list:
    """Density and control along rollouts from two Gaussian starts."""
    p = env.params
    files = []
    for k, (mean, std) in enumerate(((0.25, 0.1), (0.7, 0.05)), start=1):
        states, actions, _ = rollout(env, actor_policy(env, actor), periodic_gaussian(p, mean, std), steps)
        rows = []
        for t in range(steps + 1):
            control = actions[t] if t < steps else actor_policy(env, actor)(states[t])
            rows.extend((t * p.dt, x, states[t][i], control[i]) for i, x in enumerate(p.x))
        files.append(write_csv(out / f"swarm_profile_ep{episode}_init{k}.csv", ("t", "x", "density", "control"), rows, meta))
    return files


def run_ddpg(cfg: ExperimentConfig) -> list:
    s = cfg.section("ddpg")
    conf = ddpg_config(cfg)
    env = _make_env(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(cfg, command="ddpg")
    files = []
    marks = set(s["checkpoint_episodes"]) | {conf.n_episodes}

    def callback(episode, agent):
        if episode not in marks:
            return
        path = out / f"actor_ep{episode}.mlp"
        save_mlp(path, agent.actor)
        files.append(path)
        if env.kind == "swarm":
            files.extend(_swarm_profiles(env, agent.actor, episode, out, s["profile_steps"], meta))

    actor, critic, log = ddpg_train(env, conf, derive_rng(cfg.seed, "ddpg"), callback=callback)
    save_mlp(out / "actor.mlp", actor)
    save_mlp(out / "critic.mlp", critic)
    files += [out / "actor.mlp", out / "critic.mlp"]
    files.append(write_csv(out / "training_log.csv", LOG_COLUMNS, log.rows, meta))
    if env.kind == "cyber":
        trajs, n = acceptance.cyber_trajectories(env, actor, s["horizon_time"], extra_steps=0)
        for k, traj in enumerate(trajs, start=1):
            rows = [(t * env.params.dt, *traj[t]) for t in range(n + 1)]
            files.append(write_csv(out / f"cyber_trajectory_{k}.csv", CYBER_COLUMNS, rows, meta))
    return files


def run_evaluate(cfg: ExperimentConfig) -> list:
    s = cfg.section("evaluate")
    env = _make_env(cfg)
    meta = _meta(cfg, command="evaluate")
    rows = []
    if s["checkpoint"]:
        actor = load_mlp(s["checkpoint"])
        policy = actor_policy(env, actor)
        source = s["checkpoint"]
    elif s["table"]:
        stored = load_qtable(s["table"])
        grid = enumerate_grid(stored.dimension, stored.resolution)
        profiles = enumerate_action_profiles(env.n_states, env.n_actions)
        policy = grid_policy(grid, profiles, np.argmax(stored.values, axis=1))
        source = s["table"]
    else:
        raise ConfigError(f"{cfg.path}: [evaluate] needs checkpoint or table")
    if s["initial"]:
        starts = [np.array(s["initial"])]
    elif env.kind == "cyber":
        starts = [np.array(x) for x in acceptance.CYBER_STARTS]
    elif env.kind == "swarm":
        starts = [swarm_stationary_density(env.params)]
    else:
        starts = [np.full(env.n_states, 1.0 / env.n_states)]
    rng = derive_rng(cfg.seed, "evaluate")
    for k, mu0 in enumerate(starts, start=1):
        ev = evaluate_policy(env, policy, mu0, s["gamma"], s["horizon"], n_noise_rollouts=16, rng=rng)
        rows.append((f"discounted_return_start{k}", ev.mean))
        rows.append((f"average_reward_start{k}", rollout(env, policy, mu0, s["horizon"])[2].mean()))
    if env.kind == "swarm":
        rep = analysis.swarm_metrics(policy, env.params, rng)
        rows.extend(rep.rows())
        a_star = swarm_optimal_control(env.params)
        ref = rollout(env, lambda M: a_star, swarm_stationary_density(env.params), s["horizon"])[2].mean()
        rows.append(("average_reward_a_star", ref))
    return [write_csv(cfg.output_dir / "evaluate.csv", ("metric", "value"), rows, dict(meta, source=source))]


def run_bound(cfg: ExperimentConfig, stream=None) -> list:
    stream = stream or sys.stdout
    s = dict(cfg.section("bound"))
    tau = s.pop("tau")
    try:
        inputs = analysis.BoundInputs(**s)
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: [bound] {exc}") from exc
    eps_prime = analysis.theorem_error(inputs)
    rows = [("theorem_error", eps_prime), ("nepi_order", analysis.nepi_order(inputs))]
    if tau is not None:
        rows.append(("corollary_bound", analysis.corollary_bound(tau, eps_prime, inputs.n_profiles, inputs.K_A)))
    best_tau, best = analysis.optimal_tau(eps_prime, inputs.n_profiles, inputs.K_A)
    rows += [("optimal_tau", best_tau), ("optimal_corollary_bound", best)]
    stream.write("quantity,value\n")
    for name, value in rows:
        stream.write(f"{name},{value!r}\n")
    return []


def run_acceptance(cfg: ExperimentConfig, stream=None) -> tuple[list, bool]:
    stream = stream or sys.stdout
    s = cfg.sections.get("acceptance", {"criteria": tuple(acceptance.CRITERIA), "include_slow": True})
    results = acceptance.run_acceptance(s["criteria"], s["include_slow"], cfg.seed, echo=lambda line: print(line, file=stream))
    path = write_csv(cfg.output_dir / "acceptance.csv", acceptance.HEADER, [acceptance.as_row(r) for r in results],
                     _meta(cfg, command="acceptance"))
    return [path], all(r.passed for r in results)


COMMANDS = ("oracle", "mfq", "ddpg", "evaluate", "acceptance", "bound")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfrl", description="Mean-field control experiments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="INI experiment configuration")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "acceptance":
            files, ok = run_acceptance(cfg)
            for f in files:
                print(f"wrote {f}")
            return EXIT_OK if ok else EXIT_ACCEPTANCE
        runner = {"oracle": run_oracle, "mfq": run_mfq, "ddpg": run_ddpg, "evaluate": run_evaluate, "bound": run_bound}
        for f in runner[args.command](cfg):
            print(f"wrote {f}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MFRLError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
