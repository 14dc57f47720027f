"""One-sided growing-tree expansion with PUCT-guided exploration.

Each expansion step descends from the root: the exploring player samples a
perturbed version of its current strategy (half uniform over the support,
half a point mass on the PUCT pick), everyone else plays their plain current
strategy.  The first node that is neither expanded, terminal nor freshly
created gets all of its children added and evaluated in one shot.  The
exploring player alternates between steps, so subtrees neither side plays
toward are simply never grown.
"""

from __future__ import annotations

import math
import random

from .efg import CHANCE, PMAX, PMIN, TERMINAL, Infoset, Node, Tree


def puct_score(rec: Infoset, a_idx: int, c: float = 1.0) -> float:
    """u(x,y|I,a) plus a variance-scaled exploration bonus."""
    bonus = c * rec.variance(a_idx) * math.sqrt(rec.visits) / (1 + rec.n_a[a_idx])
    return rec.cond_value(a_idx) + bonus


def puct_pick(rec: Infoset, c: float = 1.0) -> int:
    best, best_score = 0, -math.inf
    for a in range(len(rec.actions)):
        s = puct_score(rec, a, c)
        if s > best_score:
            best, best_score = a, s
    return best


def exploring_strategy(rec: Infoset, strategy, c: float = 1.0) -> list:
    """Half uniform-over-support of the current strategy, half the PUCT pick."""
    n = len(strategy)
    support = [a for a in range(n) if strategy[a] > 0.0]
    if not support:
        support = list(range(n))
    out = [0.0] * n
    share = 0.5 / len(support)
    for a in support:
        out[a] = share
    out[puct_pick(rec, c)] += 0.5
    return out


class Expander:
    """Runs expansion steps against a shared tree; safe to use from many threads."""

    def __init__(self, tree: Tree, rng: random.Random, c_puct: float = 1.0):
        self.tree = tree
        self.rng = rng
        self.c_puct = c_puct
        self.expansions = 0
        self.steps = 0
        self._parity = 0

    def step_pair(self) -> int:
        """One step for each exploring player, alternating; returns expansions."""
        done = self.step(PMAX) + self.step(PMIN)
        return done

    def step(self, exploring: int) -> bool:
        """Descend and expand one leaf; False if the walk ended without one."""
        self.steps += 1
        tree = self.tree
        node = tree.root
        rng = self.rng
        while node.expanded:
            if node.player == TERMINAL or node.new:
                return False
            if node.player == CHANCE:
                probs = node.chance_probs
            else:
                rec, strategy = self._policy_at(node)
                if node.player == exploring:
                    probs = exploring_strategy(rec, strategy, self.c_puct)
                    idx = self._sample(probs)
                    rec.record_descent(idx, self._sample_value(rec, idx))
                    node = tree.nodes[node.children[idx]]
                    continue
                probs = strategy
            idx = self._sample(probs)
            if idx < 0:
                return False  # sub-normalized root strategy: treated as exit
            node = tree.nodes[node.children[idx]]
        if node.player == TERMINAL:
            return False
        if tree.expand(node):
            self.expansions += 1
            return True
        return False

    def _policy_at(self, node: Node):
        tree = self.tree
        if tree.gadget is not None and node.idx == tree.root.idx:
            g = tree.gadget
            return g.stats, g.root_strategy()
        rec = tree.infoset_of(node)
        return rec, rec.strategy()

    def _sample(self, probs) -> int:
        u = self.rng.random()
        acc = 0.0
        last = -1
        for idx, p in enumerate(probs):
            if p <= 0.0:
                continue
            acc += p
            last = idx
            if u < acc:
                return idx
        if acc >= 1.0 - 1e-9 and last >= 0:
            return last  # rounding slack
        return -1

    def _sample_value(self, rec: Infoset, a_idx: int) -> float:
        return rec.cond_value(a_idx)


def run_gt_cfr(tree: Tree, solver, rng: random.Random, *,
               quiescence: int = 10_000, iters_per_step: int = 1,
               max_steps: int = 1_000_000, c_puct: float = 1.0) -> Expander:
    """Deterministic single-threaded growing loop used by tests and analysis.

    Alternates expansion step pairs with solver iterations until no expansion
    has happened for `quiescence` consecutive steps (or `max_steps` elapse).
    """
    exp = Expander(tree, rng, c_puct)
    idle = 0
    steps = 0
    while idle < quiescence and steps < max_steps:
        grew = exp.step(PMAX)
        grew = exp.step(PMIN) or grew
        steps += 2
        idle = 0 if grew else idle + 2
        for _ in range(iters_per_step):
            solver.iteration()
    return exp
