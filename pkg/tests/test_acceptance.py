"""Acceptance suite: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s``.  The slow criteria
(6-8) train desk-scale agents; the whole module stays well inside its
stated runtime budgets on a laptop-class CPU.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from rsma_rl.baselines import build_uniform_actions, make_qtable, q_update
from rsma_rl.channel import make_rng, sample_true_channel
from rsma_rl.config import RunConfig, desk_profile
from rsma_rl.env import EnvConfig, RawAction, RsmaEnv, penalty, sdma_variant, softmax
from rsma_rl.experiments import evaluate_run, run_power_sweep, run_qos_sweep, sweep_records_from_csv, train_one_seed
from rsma_rl.nn import PolicyValueNet, gaussian_log_prob
from rsma_rl.phy import check_feasibility, common_rate, compute_precoders, compute_sinrs
from rsma_rl.ppo import clip_function, ppo_objective
from test_phy import random_simplex, sinr_oracle

SEEDS = (0, 1, 2, 3, 4)


def report(number, name, passed, detail=""):
    tag = "PASS" if passed else "FAIL"
    print(f"[{tag}] criterion {number}: {name}" + (f" ({detail})" if detail else ""))
    assert passed, f"criterion {number} failed: {name} {detail}"


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Matched-budget desk-scale runs for criteria 6 and 7: four agents,
    five seeds each, all trained for 300 episodes x 100 steps."""
    root = tmp_path_factory.mktemp("desk_runs")
    base = desk_profile(RunConfig())
    variants = {
        "ppo": base,
        "ppo_sdma": replace(base, env=sdma_variant(base.env)),
        "qlearning": replace(base, algorithm="qlearning"),
        "greedy": replace(base, algorithm="greedy"),
    }
    t0 = time.perf_counter()
    results = {}
    for name, config in variants.items():
        per_seed = []
        for seed in SEEDS:
            record = train_one_seed(config, seed, root / name)
            evaluation = evaluate_run(record, config)
            per_seed.append((record, evaluation))
        results[name] = per_seed
    results["train_time_s"] = time.perf_counter() - t0
    return results


def test_criterion_01_formula_oracle_suite():
    t0 = time.perf_counter()
    max_err = 0.0
    for k in (1, 2, 4):
        rng = make_rng(1000 + k)
        for _ in range(100):
            true = sample_true_channel(rng, 4, k)
            pc = compute_precoders(sample_true_channel(rng, 4, k))
            mu = random_simplex(rng, k + 1)
            p_t = 10.0 ** rng.uniform(0, 4)
            gamma_c, gamma_p = compute_sinrs(true, pc, mu, p_t)
            oc, op = sinr_oracle(true, pc, mu, p_t)
            # 1e-12 agreement, relative for SINRs above 1 (they reach 1e4,
            # where absolute 1e-12 is finer than double rounding allows)
            max_err = max(
                max_err,
                (np.abs(gamma_c - oc) / np.maximum(1.0, np.abs(oc))).max(),
                (np.abs(gamma_p - op) / np.maximum(1.0, np.abs(op))).max(),
            )
            # the rate stack on top of the SINRs (Eq. 3-5 shape)
            rates = np.log2(1 + gamma_p)
            r_c = common_rate(gamma_c)
            assert r_c == np.min(np.log2(1 + gamma_c))
            assert np.isfinite(rates).all()
    elapsed = time.perf_counter() - t0
    report(
        1,
        "vectorized SINR/rate formulas match the scalar oracle",
        max_err < 1e-12 and elapsed < 1.0,
        f"max err {max_err:.2e}, {elapsed:.2f}s",
    )


def test_criterion_02_constraints_by_construction():
    t0 = time.perf_counter()
    k = 4
    rng = make_rng(2024)
    cfg = EnvConfig(m=4, k=4, qos=np.full(4, 0.1), episode_len=5)
    env = RsmaEnv(cfg, seed=3)
    env.reset()
    n = 100_000
    power_logits = rng.normal(size=(n, k + 1)) * 10
    split_logits = rng.normal(size=(n, k)) * 10

    # batched version of the env mapping, on the live channel
    mu = softmax(power_logits)
    gamma_c, _ = compute_sinrs(
        env.channel.true_channel, env._precoders, mu, env.p_t_linear
    )
    r_c = np.log2(1.0 + gamma_c.min(axis=1))
    c = softmax(split_logits) * r_c[:, None]

    power_ok = np.abs(mu.sum(axis=1) - 1.0) <= 1e-9
    split_ok = np.abs(c.sum(axis=1) - r_c) <= 1e-9 * np.maximum(1.0, r_c)
    nonneg_ok = (mu.min(axis=1) >= 0) & (c.min(axis=1) >= 0)
    all_ok = bool(np.all(power_ok & split_ok & nonneg_ok))

    # spot-check a sample through the actual env mapping + checker
    for i in range(0, n, 10_000):
        alloc = env.action_to_allocation(RawAction(power_logits[i], split_logits[i]))
        from rsma_rl.phy import rate_report

        rep = rate_report(env.channel.true_channel, env._precoders, alloc, env.p_t_linear)
        flags = check_feasibility(alloc, rep, cfg.qos)
        all_ok &= flags.power_ok and flags.common_split_ok and flags.nonneg_ok
    elapsed = time.perf_counter() - t0
    report(
        2,
        "1e5 fuzzed Softmax actions satisfy power/split/nonneg constraints",
        all_ok and elapsed < 5.0,
        f"{elapsed:.2f}s",
    )


def test_criterion_03_reward_edge_cases():
    # unit level: the penalty quantizer
    ok = penalty(np.array([1.0, 1.0, 1.0, 1.0]), np.full(4, 0.1)) == 0.0
    ok &= penalty(np.array([0.0, 0.0, 0.0, 0.0]), np.full(4, 0.1)) == 1.0
    ok &= penalty(np.array([1.0, 1.0, 0.0, 0.0]), np.full(4, 0.1)) == 0.5

    # env level: all met => r equals the sum-rate exactly; none met => 0
    cfg_easy = EnvConfig(m=4, k=4, qos=np.zeros(4), episode_len=3)
    env = RsmaEnv(cfg_easy, seed=1)
    env.reset()
    out = env.step(RawAction(np.zeros(5), np.zeros(4)))
    ok &= out.penalty == 0.0 and out.reward == out.sum_rate

    cfg_hard = EnvConfig(m=4, k=4, qos=np.full(4, 1e9), episode_len=3)
    env = RsmaEnv(cfg_hard, seed=1)
    env.reset()
    out = env.step(RawAction(np.zeros(5), np.zeros(4)))
    ok &= out.penalty == 1.0 and out.reward == 0.0

    # two of four violated => half the sum-rate survives
    cfg_mixed = EnvConfig(m=4, k=4, qos=np.array([0.0, 0.0, 1e9, 1e9]), episode_len=3)
    env = RsmaEnv(cfg_mixed, seed=1)
    env.reset()
    out = env.step(RawAction(np.zeros(5), np.zeros(4)))
    ok &= out.penalty == 0.5 and out.reward == out.sum_rate * 0.5
    report(3, "reward edge cases are exact", bool(ok))


def test_criterion_04_ppo_loss_tabulated_values():
    ok = clip_function(0.2, 1.0) == 1.2
    ok &= clip_function(0.2, -1.0) == -0.8
    ok &= clip_function(0.2, 0.0) == 0.0
    ok &= ppo_objective(0.0, 0.0, 1.0, 0.2) == 1.0
    ok &= ppo_objective(np.log(1.5), 0.0, 1.0, 0.2) == 1.2
    ok &= ppo_objective(np.log(0.5), 0.0, -1.0, 0.2) == -0.8
    report(4, "clip/objective reproduce the six tabulated values exactly", bool(ok))


def test_criterion_05_gradient_checks():
    from rsma_rl.autodiff import Tensor, minimum, softmax as softmax_t
    from rsma_rl.nn import gaussian_entropy, gaussian_entropy_t, gaussian_log_prob_t
    from test_nn import fd_grad

    t0 = time.perf_counter()
    rng = make_rng(55)
    net = PolicyValueNet(4, 5, hidden=(8, 8), rng=make_rng(54))
    obs = rng.normal(size=(12, 4))
    actions = rng.normal(size=(12, 5)) * 0.7
    logp_old = gaussian_log_prob(net.forward_np(obs)[0], net.log_std.data, actions)
    logp_old = logp_old + np.linspace(-0.4, 0.4, 12)  # straddle the clip boundary
    adv = rng.normal(size=12)
    returns = rng.normal(size=12)
    w = rng.normal(size=(12, 5))

    worst = 0.0

    def check(build_t, value_fn):
        nonlocal worst
        for p in net.parameters():  # drop grads from the previous check
            p.grad = None
        loss = build_t()
        loss.backward()
        analytic = np.concatenate(
            [
                (p.grad if p.grad is not None else np.zeros_like(p.data)).ravel()
                for p in net.parameters()
            ]
        )
        numeric = fd_grad(net, value_fn)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-6)
        worst = max(worst, rel.max())

    # 1) plain network outputs
    check(
        lambda: (lambda mv: (mv[0] * w).sum() + mv[1].square().sum())(
            net.forward(Tensor(obs))
        ),
        lambda: float(
            (net.forward_np(obs)[0] * w).sum() + (net.forward_np(obs)[1] ** 2).sum()
        ),
    )
    # 2) Softmax-composed head
    check(
        lambda: (softmax_t(net.forward(Tensor(obs))[0]) * w).sum(),
        lambda: float((softmax(net.forward_np(obs)[0]) * w).sum()),
    )
    # 3) Gaussian log-prob
    check(
        lambda: gaussian_log_prob_t(
            net.forward(Tensor(obs))[0], net.log_std, actions
        ).sum(),
        lambda: float(
            gaussian_log_prob(net.forward_np(obs)[0], net.log_std.data, actions).sum()
        ),
    )

    # 4) full clipped PPO loss
    def build_full():
        mean, value = net.forward(Tensor(obs))
        lpn = gaussian_log_prob_t(mean, net.log_std, actions)
        surr = minimum(
            (lpn - logp_old).clip(-20.0, 20.0).exp() * adv, clip_function(0.2, adv)
        )
        return (
            -surr.mean()
            + 0.5 * (value - returns).square().mean()
            - 0.01 * gaussian_entropy_t(net.log_std)
        )

    def value_full():
        mean, value = net.forward_np(obs)
        lpn = gaussian_log_prob(mean, net.log_std.data, actions)
        surr = ppo_objective(lpn, logp_old, adv, 0.2)
        return float(
            -surr.mean()
            + 0.5 * ((value - returns) ** 2).mean()
            - 0.01 * gaussian_entropy(net.log_std.data)
        )

    ratio = np.exp(
        gaussian_log_prob(net.forward_np(obs)[0], net.log_std.data, actions) - logp_old
    )
    assert (np.abs(ratio - 1) > 0.2).any() and (np.abs(ratio - 1) <= 0.2).any()
    check(build_full, value_full)

    elapsed = time.perf_counter() - t0
    report(
        5,
        "finite differences confirm gradients (net, log-prob, clipped loss)",
        worst < 1e-4 and elapsed < 30.0,
        f"worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_06_learning_sanity(desk_runs):
    wins = 0
    ratios = []
    for record, _ in desk_runs["ppo"]:
        r = record.mean_rewards
        first, last = r[:30].mean(), r[-30:].mean()
        ratios.append(last / first)
        if last >= 1.2 * first:
            wins += 1
    elapsed = desk_runs["train_time_s"]
    report(
        6,
        "desk-scale PPO improves final/initial mean reward by >= 20%",
        wins >= 4 and elapsed < 600.0,
        f"{wins}/5 seeds, ratios {[f'{x:.2f}' for x in ratios]}, shared train {elapsed:.0f}s",
    )


def test_criterion_07_ordering_reproduction(desk_runs):
    rates = {
        name: np.array([ev.mean_sum_rate for _, ev in desk_runs[name]])
        for name in ("ppo", "ppo_sdma", "qlearning", "greedy")
    }
    ppo_vs_q = int(np.sum(rates["ppo"] > rates["qlearning"]))
    q_vs_greedy = int(np.sum(rates["qlearning"] >= rates["greedy"]))
    ppo_vs_sdma = int(np.sum(rates["ppo"] > rates["ppo_sdma"]))
    passed = ppo_vs_q >= 4 and q_vs_greedy >= 4 and ppo_vs_sdma >= 4
    detail = (
        f"PPO>Q {ppo_vs_q}/5, Q>=Greedy {q_vs_greedy}/5, RSMA>SDMA {ppo_vs_sdma}/5; "
        f"means ppo={rates['ppo'].mean():.2f} q={rates['qlearning'].mean():.2f} "
        f"greedy={rates['greedy'].mean():.2f} sdma={rates['ppo_sdma'].mean():.2f}"
    )
    report(7, "evaluation ordering PPO > Q >= Greedy and RSMA > SDMA", passed, detail)


def _count_inversions(values, decreasing=False):
    diffs = np.diff(values)
    return int(np.sum(diffs < 0)) if not decreasing else int(np.sum(diffs > 0))


def _seed_averaged_curve(records, metric):
    curve = {}
    for rec in records:
        curve.setdefault(rec["x_value"], []).append(rec[metric])
    xs = sorted(curve)
    return [float(np.mean(curve[x])) for x in xs]


def test_criterion_08_trend_reproduction(tmp_path):
    base = replace(desk_profile(RunConfig()), episodes=200, seeds=(0, 1))
    t0 = time.perf_counter()
    power_csv = run_power_sweep(base, [20.0, 30.0, 40.0, 50.0, 60.0], tmp_path / "power")
    power_rates = _seed_averaged_curve(sweep_records_from_csv(power_csv), "mean_sum_rate")

    qos_csv = run_qos_sweep(base, [0.0, 0.1, 0.25, 0.5, 1.0], tmp_path / "qos")
    qos_rewards = _seed_averaged_curve(sweep_records_from_csv(qos_csv), "mean_reward")

    power_inv = _count_inversions(power_rates)
    qos_inv = _count_inversions(qos_rewards, decreasing=True)
    elapsed = time.perf_counter() - t0
    report(
        8,
        "sum-rate grows with power, reward falls with QoS (<= 1 inversion each)",
        power_inv <= 1 and qos_inv <= 1,
        f"power {np.round(power_rates, 2).tolist()} ({power_inv} inv), "
        f"qos {np.round(qos_rewards, 3).tolist()} ({qos_inv} inv), {elapsed:.0f}s",
    )


def test_criterion_09_baseline_mechanics():
    qt = make_qtable(4, 9, np.zeros(8))
    ok = qt.values.shape == (256, 9) and 256 == 2 ** (2 * 4)

    # Bellman fixed point of the one-step rule
    chain = make_qtable(1, 1, np.zeros(2))
    s = 0
    for _ in range(10_000):
        q_update(chain, s, 0, 1.0, 1 - s, alpha=0.1, discount=0.9)
        s = 1 - s
    ok &= abs(chain.values[0, 0] - 10.0) < 1e-3

    # greedy history is monotone under random rewards
    from rsma_rl.baselines import greedy_record, greedy_select, make_greedy_history

    hist = make_greedy_history(99)
    rng = make_rng(0)
    prev = hist.best_reward.copy()
    monotone = True
    for _ in range(2000):
        a = greedy_select(hist, rng)
        greedy_record(hist, a, float(rng.random() * 5))
        monotone &= bool(np.all(hist.best_reward >= prev))
        prev = hist.best_reward.copy()
    ok &= monotone

    actions = build_uniform_actions(9, 4)
    ok &= actions.mu[4, 0] == 0.5 and actions.mu[4, 1] == 0.125
    grid99 = build_uniform_actions(99, 4)
    ok &= bool(np.array_equal(grid99.mu[:, 0], np.arange(1, 100) / 100.0))
    report(9, "Q-table dims, fixed point, greedy monotonicity, exact grid", bool(ok))


def test_criterion_10_determinism_and_persistence(tmp_path):
    config = replace(
        desk_profile(RunConfig()),
        episodes=10,
        eval_episodes=5,
    )
    rec_a = train_one_seed(config, 7, tmp_path / "a")
    rec_b = train_one_seed(config, 7, tmp_path / "b")

    def stripped(path):
        return [
            ",".join(line.split(",")[:-1])
            for line in (path / "episodes.csv").read_text().splitlines()
        ]

    ok = stripped(rec_a.out_dir) == stripped(rec_b.out_dir)

    # checkpoint round-trip: two independent loads evaluate identically
    eval_a = evaluate_run(rec_a, config)
    eval_b = evaluate_run(rec_a, config)
    ok &= eval_a.mean_reward == eval_b.mean_reward
    ok &= eval_a.mean_sum_rate == eval_b.mean_sum_rate
    ok &= np.array_equal(eval_a.episode_rows, eval_b.episode_rows)

    # and the twin training run evaluates to the same numbers
    eval_c = evaluate_run(rec_b, config)
    ok &= eval_c.mean_reward == eval_a.mean_reward
    report(10, "byte-identical reruns and exact checkpoint round-trip", bool(ok))
