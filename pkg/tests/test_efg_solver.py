import random

import pytest

from fog_engine.efg import (
    PMAX, PMIN, TERMINAL, best_response_value, build_full_tree,
    conditional_value, counterfactual_value, exploitability, expected_value,
    full_best_response, gift_estimate, profile_from_tree, reach_prob,
    uniform_profile,
)
from fog_engine.solver import Solver
from fog_engine.toygames import kuhn_poker, matching_pennies, matrix_game, random_game

from oracles import sequence_form_lp_value


def fixed_profile(tree):
    """Snapshot the live strategies into an immutable profile."""
    table = {k: list(rec.strategy()) for k, rec in tree.infosets.items()}

    def prof(player, key, n):
        got = table.get((player, key))
        return got if got is not None else [1.0 / n] * n
    return prof


def test_reach_probs_on_kuhn():
    tree = build_full_tree(kuhn_poker().root_state())
    prof = uniform_profile
    assert reach_prob(tree, PMAX, tree.root, prof) == 1.0
    assert reach_prob(tree, PMIN, tree.root, prof) == 1.0
    # first P1 decision node: chance reach 1/6, no own actions yet
    n1 = tree.nodes[tree.root.children[0]]
    assert reach_prob(tree, PMAX, n1, prof) == 1.0
    leaf = tree.nodes[tree.nodes[n1.children[0]].children[0]]
    assert reach_prob(tree, PMAX, leaf, prof) == pytest.approx(0.5)
    assert reach_prob(tree, PMIN, leaf, prof) == pytest.approx(0.5)


def test_pure_profile_reach_matches_path_walk():
    rng = random.Random(2)
    game = random_game(rng, depth=5)
    tree = build_full_tree(game.root_state())

    def pure(player, key, n):
        out = [0.0] * n
        out[hash((player, key)) % n] = 1.0
        return out

    for node in tree.nodes:
        if node.player != TERMINAL:
            continue
        for player in (PMAX, PMIN):
            r = reach_prob(tree, player, node, pure)
            # independent oracle: walk the path and check membership
            on_path = 1.0
            cur = node
            while cur.parent >= 0:
                parent = tree.nodes[cur.parent]
                if parent.player == player:
                    if pure(player, parent.state.seq_key(player),
                            len(parent.actions))[cur.action_index] == 0.0:
                        on_path = 0.0
                cur = parent
            assert r == on_path


def test_cfv_matches_bruteforce_on_random_tree():
    rng = random.Random(5)
    game = random_game(rng, depth=4, obs_symbols=2)
    tree = build_full_tree(game.root_state())
    prof = uniform_profile
    for (player, key), rec in tree.infosets.items():
        got = counterfactual_value(tree, prof, player, key)
        # brute force: enumerate every leaf below every member
        want = 0.0
        for m_idx in rec.members:
            node = tree.nodes[m_idx]
            w = 1.0
            cur = node
            while cur.parent >= 0:
                parent = tree.nodes[cur.parent]
                probs = (parent.chance_probs if parent.player == 0
                         else prof(parent.player,
                                   parent.state.seq_key(parent.player),
                                   len(parent.actions)))
                if parent.player != player:
                    w *= probs[cur.action_index]
                cur = parent
            want += w * expected_value(tree, node, prof)
        assert got == pytest.approx(want, abs=1e-12)


def test_cfv_decomposition_and_zero_sum():
    rng = random.Random(7)
    for _ in range(5):
        game = random_game(rng, depth=5)
        tree = build_full_tree(game.root_state())
        solver = Solver(tree)
        solver.run(3)
        prof = fixed_profile(tree)
        # zero-sum: the two players' sweep values mirror each other
        solver2 = Solver(build_full_tree(game.root_state()))
        assert expected_value(tree, tree.root, prof) == pytest.approx(
            -(-expected_value(tree, tree.root, prof)))
        for (player, key), rec in tree.infosets.items():
            cfv_set = counterfactual_value(tree, prof, player, key)
            strat = prof(player, key, len(rec.actions))
            mix = sum(strat[a] * counterfactual_value(tree, prof, player, key, a)
                      for a in range(len(rec.actions)))
            sign = 1.0 if player == PMAX else -1.0
            assert sign * cfv_set == pytest.approx(sign * mix, abs=1e-9)


def test_sweep_cfvs_equal_independent_recursion():
    rng = random.Random(13)
    game = random_game(rng, depth=4)
    tree = build_full_tree(game.root_state())
    solver = Solver(tree)
    prof = fixed_profile(tree)  # capture strategies before updates
    solver._sweep(PMAX)
    for (player, key), rec in tree.infosets.items():
        if player != PMAX or rec.last_reach == 0.0 and not any(rec.last_cfv):
            continue
        for a in range(len(rec.actions)):
            want = counterfactual_value(tree, prof, PMAX, key, a)
            assert rec.last_cfv[a] == pytest.approx(want, abs=1e-9)


def test_terminal_deposit_is_reach_times_value():
    # one pmax decision over two terminals, opponent absent
    from fog_engine.toygames import TabularGame
    g = TabularGame()
    root = g.add_node(PMAX, ("r",), ("r",), actions=("a", "b"))
    for a, u in (("a", 0.5), ("b", -0.25)):
        t = g.add_node(TERMINAL, (("r",), a), (("r",), "o"), util=u)
        g.link(root, a, t)
    tree = build_full_tree(g.root_state())
    solver = Solver(tree)
    solver._sweep(PMAX)
    rec = tree.infosets[(PMAX, ("r",))]
    assert rec.last_cfv == pytest.approx([0.5, -0.25])


def test_best_response_value_on_terminal_menu():
    # pmin picks between terminals worth 0.2 and -0.1: best response takes -0.1
    from fog_engine.toygames import TabularGame
    g = TabularGame()
    root = g.add_node(PMIN, ("r",), ("r",), actions=("a", "b"))
    for a, u in (("a", 0.2), ("b", -0.1)):
        t = g.add_node(TERMINAL, (("r",), "o"), (("r",), a), util=u)
        g.link(root, a, t)
    tree = build_full_tree(g.root_state())
    assert best_response_value(tree, uniform_profile, PMIN, ("r",)) == pytest.approx(-0.1)


def test_best_response_exploits_revealing_strategy():
    # 2x2 guessing game: if pmax always plays row 0, pmin exploits fully
    game = matrix_game([[1, -1], [-1, 1]])
    tree = build_full_tree(game.root_state())

    def revealing(player, key, n):
        return [1.0, 0.0] if player == PMAX else [0.5, 0.5]

    v = full_best_response(tree, revealing, PMIN)
    assert v == pytest.approx(-1.0)
    v_unif = full_best_response(tree, uniform_profile, PMIN)
    assert v_unif == pytest.approx(0.0)


def test_gift_estimate_toy():
    # pmin first chooses between a branch worth -0.2 (for pmax) and one worth 0;
    # entering the 0 branch is a provable mistake worth 0.2 in pmax CFV
    from fog_engine.toygames import TabularGame
    g = TabularGame()
    root = g.add_node(PMIN, ("r",), ("r",), actions=("good", "bad"))
    t_good = g.add_node(TERMINAL, (("r",), "og"), (("r",), "good"), util=-0.2)
    g.link(root, "good", t_good)
    inner = g.add_node(PMIN, (("r",), "ob"), (("r",), "bad"), actions=("x",))
    g.link(root, "bad", inner)
    t_bad = g.add_node(TERMINAL, ((("r",), "ob"), "ox"), ((("r",), "bad"), "x"),
                       util=0.0)
    g.link(inner, "x", t_bad)
    tree = build_full_tree(g.root_state())

    def pure_bad(player, key, n):
        if player == PMIN and key == ("r",):
            return [0.0, 1.0]
        return [1.0 / n] * n

    root_key = ("r",)
    assert gift_estimate(tree, pure_bad, root_key) == pytest.approx(0.0)
    inner_key = (("r",), "bad")
    # cfv(root, bad)=0 under pure_bad, cfv(root)=0: clamped positive part of
    # per-prefix improvements; against the uniform profile the bad branch
    # improves pmax's cfv by 0.1
    assert gift_estimate(tree, uniform_profile, inner_key) == pytest.approx(0.1)
    assert gift_estimate(tree, uniform_profile, root_key) == pytest.approx(0.0)


def test_gift_nonnegative_on_random_games():
    rng = random.Random(23)
    for _ in range(5):
        game = random_game(rng, depth=5)
        tree = build_full_tree(game.root_state())
        solver = Solver(tree)
        solver.run(5)
        prof = fixed_profile(tree)
        for (player, key), rec in tree.infosets.items():
            if player == PMIN:
                assert gift_estimate(tree, prof, key) >= 0.0


def test_lp_oracle_reproduces_kuhn_value():
    game = kuhn_poker()
    v = sequence_form_lp_value(game)
    assert v == pytest.approx(-1.0 / 18.0, abs=1e-9)


def test_pcfr_converges_on_kuhn():
    game = kuhn_poker()
    tree = build_full_tree(game.root_state())
    solver = Solver(tree, maintain_average=True)
    solver.run(3000)
    prof = solver.average_profile()
    gap = exploitability(tree, prof)
    assert gap < 1e-3
    v = expected_value(tree, tree.root, prof)
    assert v == pytest.approx(-1.0 / 18.0, abs=0.01)


def test_pcfr_last_iterate_on_matching_pennies():
    game = matching_pennies()
    tree = build_full_tree(game.root_state())
    solver = Solver(tree)
    solver.run(1000)
    prof = solver.last_iterate_profile()
    for (player, key), rec in tree.infosets.items():
        strat = prof(player, key, len(rec.actions))
        for p in strat:
            assert abs(p - 0.5) < 0.05


def test_regrets_stay_nonnegative():
    rng = random.Random(31)
    game = random_game(rng, depth=5)
    tree = build_full_tree(game.root_state())
    solver = Solver(tree)
    solver.run(50)
    for rec in tree.infosets.values():
        assert all(r >= 0.0 for r in rec.matcher.regrets)


def test_exploitability_decreases_on_kuhn_and_matrix_games():
    import statistics
    for maker in (kuhn_poker, lambda: matrix_game([[0.3, -0.6], [-0.2, 0.5]])):
        checkpoints = {}
        for seed in range(3):
            tree = build_full_tree(maker().root_state())
            solver = Solver(tree, maintain_average=True)
            gaps = []
            for block in range(4):
                solver.run(500)
                gaps.append(exploitability(tree, solver.average_profile()))
            checkpoints[seed] = gaps
        medians = [statistics.median(checkpoints[s][i] for s in checkpoints)
                   for i in range(4)]
        assert all(medians[i + 1] <= medians[i] + 1e-9 for i in range(3))
        assert medians[-1] < 1e-3


def test_one_pmax_one_pmin_infoset_intersection():
    rng = random.Random(37)
    for _ in range(5):
        game = random_game(rng, depth=5)
        tree = build_full_tree(game.root_state())
        pairs = {}
        for node in tree.nodes:
            if node.player == TERMINAL:
                continue
            k = (node.state.seq_key(PMAX), node.state.seq_key(PMIN))
            assert k not in pairs, "two nodes share both sequences"
            pairs[k] = node.idx


def test_margin_zero_at_equilibrium_and_positive_when_dominant():
    from fog_engine.efg import margin
    # pmin guesses pmax's committed coin; at equilibrium margins vanish
    game = matching_pennies()
    tree = build_full_tree(game.root_state())
    solver = Solver(tree, maintain_average=True)
    solver.run(4000)
    prof = solver.average_profile()
    j_key = (("r",), "hidden")
    m = margin(tree, prof, prof, j_key)
    assert abs(m) < 0.01
    # a strictly better pmax strategy raises the margin above zero
    game2 = matrix_game([[0.5, 0.5], [-1.0, -1.0]])  # row 0 dominates
    tree2 = build_full_tree(game2.root_state())

    def bad(player, key, n):
        return [0.0, 1.0] if player == PMAX else [1.0 / n] * n

    def good(player, key, n):
        return [1.0, 0.0] if player == PMAX else [1.0 / n] * n

    j2 = (("r",), "h")
    assert margin(tree2, good, bad, j2) == pytest.approx(1.5)
