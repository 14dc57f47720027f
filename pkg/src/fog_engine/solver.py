"""Equilibrium computation: predictive CFR+ sweeps over the expanded tree.

One solver instance owns all regret state.  Each iteration runs a maximizer
sweep then a minimizer sweep; a sweep walks the expanded region, deposits
opponent-reach-weighted leaf values into the acting player's sequences, then
backs counterfactual values up the infoset graph and applies a regret-matching
update per visited infoset.  Subtrees the non-acting side never reaches are
skipped (partial pruning).
"""

from __future__ import annotations

from typing import Optional

from .efg import CHANCE, PMAX, PMIN, TERMINAL, Infoset, Node, Tree


class Solver:
    def __init__(self, tree: Tree, maintain_average: bool = False):
        self.tree = tree
        self.iterations = 0
        self.maintain_average = maintain_average
        self.root_value = {PMAX: 0.0, PMIN: 0.0}
        self._visited: list[Infoset] = []

    def iteration(self) -> None:
        """One alternating PCFR+ iteration (pmax sweep, then pmin sweep).

        The Resolve/Maxmargin root minimizers update at the end of the pmin
        sweep, inside _sweep, so each iteration re-blends the root strategy.
        """
        self._sweep(PMAX)
        self._sweep(PMIN)
        self.iterations += 1
        if self.maintain_average:
            self._accumulate_average()

    def run(self, n: int) -> None:
        for _ in range(n):
            self.iteration()

    # ------------------------------------------------------------------
    def _sweep(self, player: int) -> None:
        tree = self.tree
        gadget = tree.gadget
        self._visited.clear()
        root_util = 0.0
        root = tree.root

        if gadget is not None:
            root_util = self._sweep_gadget_root(player)
        else:
            root_util = self._walk(root, player, 1.0, None)

        # fold counterfactual values bottom-up and update each visited infoset
        for rec in sorted(self._visited, key=lambda r: -r.seq_depth):
            strat = rec.matcher.strategy
            acc = rec.acc
            total = 0.0
            for a in range(len(acc)):
                total += strat[a] * acc[a]
            parent = rec.parent_seq
            if parent is None:
                root_util += total
            elif gadget is not None and parent[0] is gadget.ROOT_KEY:
                gadget.acc[parent[1]] += total
            else:
                self.tree.infosets[(player, parent[0])].acc[parent[1]] += total
            rec.matcher.update(acc)
            rec.last_cfv = list(acc)
            rec.last_reach = rec.reach_acc
            for a in range(len(acc)):
                acc[a] = 0.0
            rec.visited = False

        if gadget is not None and player == PMIN:
            root_util = gadget.update_root_minimizers()
        self.root_value[player] = root_util

    def _sweep_gadget_root(self, player: int) -> float:
        """Handle the subgame root layer: Pmin picks J, then chance picks h."""
        tree = self.tree
        gadget = tree.gadget
        root = tree.root
        root_util = 0.0
        pi_min = gadget.root_strategy()
        for j_idx, chance_idx in enumerate(root.children):
            chance_node = tree.nodes[chance_idx]
            if player == PMIN:
                # acting player: visit every J; deposits flow to gadget.acc[j]
                for k, member_idx in enumerate(chance_node.children):
                    p = chance_node.chance_probs[k]
                    if p > 0.0:
                        gadget.acc[j_idx] += self._walk(
                            tree.nodes[member_idx], player, p,
                            (gadget.ROOT_KEY, j_idx))
            else:
                pj = pi_min[j_idx]
                if pj <= 0.0:
                    tree.prune_count += 1
                    continue
                for k, member_idx in enumerate(chance_node.children):
                    p = pj * chance_node.chance_probs[k]
                    if p > 0.0:
                        root_util += self._walk(tree.nodes[member_idx], player,
                                                p, None)
        return root_util

    def _walk(self, node: Node, player: int, opp_reach: float, last_seq) -> float:
        """Deposit CFVs below `node`; returns the contribution to `last_seq`.

        `opp_reach` is the chance-and-opponent reach probability.  Deposits for
        deeper sequences go straight into infoset accumulators; the return
        value carries only what belongs to the incoming sequence.
        """
        node.new = False
        if node.player == TERMINAL or not node.expanded:
            v = node.value if player == PMAX else -node.value
            return opp_reach * v

        tree = self.tree
        if node.player == player:
            rec = tree.infoset_of(node)
            if not rec.visited:
                rec.visited = True
                rec.reach_acc = 0.0
                self._visited.append(rec)
            rec.reach_acc += opp_reach
            acc = rec.acc
            key = rec.key
            for idx, child_idx in enumerate(node.children):
                acc[idx] += self._walk(tree.nodes[child_idx], player,
                                       opp_reach, (key, idx))
            return 0.0

        if node.player == CHANCE:
            probs = node.chance_probs
        else:
            probs = tree.infoset_of(node).strategy()
        total = 0.0
        for idx, child_idx in enumerate(node.children):
            p = probs[idx]
            if p <= 0.0:
                tree.prune_count += 1
                continue
            total += self._walk(tree.nodes[child_idx], player,
                                opp_reach * p, last_seq)
        return total

    # ------------------------------------------------------------------
    def _accumulate_average(self) -> None:
        """Sequence-form strategy averaging (toy games; gadget-free trees)."""
        if self.tree.gadget is not None:
            return
        infosets = sorted(self.tree.infosets.values(), key=lambda r: r.seq_depth)
        reach: dict = {}
        for rec in infosets:
            if rec.parent_seq is None:
                r = 1.0
            else:
                pkey, a_idx = rec.parent_seq
                r = reach.get((rec.player, pkey, a_idx), 0.0)
            strat = rec.matcher.strategy
            if rec.avg_seq is None:
                rec.avg_seq = [0.0] * len(strat)
            for a in range(len(strat)):
                rec.avg_seq[a] += r * strat[a]
                reach[(rec.player, rec.key, a)] = r * strat[a]

    def average_profile(self):
        """Behavioral profile from the sequence-form averages (uniform fallback)."""
        table = {}
        for (player, key), rec in self.tree.infosets.items():
            if rec.avg_seq is not None:
                tot = sum(rec.avg_seq)
                if tot > 0:
                    table[(player, key)] = [w / tot for w in rec.avg_seq]

        def prof(player, key, n):
            got = table.get((player, key))
            if got is None:
                return [1.0 / n] * n
            return got
        return prof

    def last_iterate_profile(self):
        """The current (not averaged) strategies, as a profile function."""
        if self.iterations == 0:
            raise RuntimeError("no iterations have run")
        tree = self.tree

        def prof(player, key, n):
            rec = tree.infosets.get((player, key))
            if rec is None:
                return [1.0 / n] * n
            return rec.strategy()
        return prof
