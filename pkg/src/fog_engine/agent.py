"""The playing agent: belief tracking, per-turn KLUSS construction, and search.

A turn proceeds as: update the belief from the observation stream, find the
old-tree nodes consistent with our observations, keep the order-2 knowledge
neighbourhood (every opponent root infoset touching ours), top the sample up
to the configured infoset size with fresh positions (opponent assumed fully
informed there), attach the gadget root, then run the solver thread and the
expander threads until the budget runs out and purify the resulting strategy.
"""

from __future__ import annotations

import math
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from .belief import init_belief, sample_infoset, update_opponent_move, update_own_move
from .board import (
    BLACK, WHITE, Move, Position, apply_unchecked, is_terminal, moves_for,
    square_attacked,
)
from .efg import CHANCE, GameState, PMAX, PMIN, TERMINAL, Tree, profile_from_tree
from .evaluator import BuiltinEvaluator, KING_HANG_VALUE, PIECE_VALUES, make_evaluator
from .expander import Expander
from .observe import ObservationRecord, observe
from .policy import StableActionTracker, TurnBudget, budget_turn, select_move_index
from .solver import Solver
from .subgame import assemble_subgame, resolve_priors


class Interner:
    """Stable small-int identities for nested sequence keys."""

    def __init__(self):
        self._table: dict = {}

    def __call__(self, key) -> int:
        table = self._table
        got = table.get(key)
        if got is None:
            got = table[key] = len(table)
        return got


class FowGame:
    """Shared per-game context: evaluator, key interning, observation cache."""

    def __init__(self, color: int, evaluator=None):
        self.color = color  # the maximizing player's color
        self.evaluator = evaluator or BuiltinEvaluator()
        self.intern = Interner()
        self._obs_cache: dict = {}
        self._builtin = isinstance(self.evaluator, BuiltinEvaluator)

    def clear_cache(self):
        self._obs_cache.clear()

    def obs_entry(self, pos: Position, viewer: int):
        """(interned digest id, record) for observe(pos, viewer), cached."""
        k = (pos.key(), pos.halfmove >= 100, viewer)
        got = self._obs_cache.get(k)
        if got is None:
            rec = observe(pos, viewer)
            got = self._obs_cache[k] = (self.intern(("obs", rec.digest())), rec)
        return got

    def extend_seq(self, seq_id: int, move, obs_id: int) -> int:
        return self.intern((seq_id, move, obs_id))

    # -- fast builtin evaluation sharing the observation cache --------------
    def position_value(self, pos: Position, result: Optional[int] = None) -> float:
        """Leaf value from the maximizing player's perspective."""
        color = self.color
        if result is None:
            result = is_terminal(pos)
        if result is not None:
            if result == 0:
                return 0.0
            return 1.0 if (result == 1) == (color == WHITE) else -1.0
        if not self._builtin:
            return self.evaluator.position_value(pos, color)
        ek = 12 if pos.stm == WHITE else 6
        ks = pos.board.find(ek)
        if ks >= 0 and square_attacked(pos.board, ks, pos.stm):
            # the mover can take the king: nearly decided in the mover's favor
            return KING_HANG_VALUE if pos.stm == color else -KING_HANG_VALUE
        ev = self.evaluator
        mat = 0.0
        for code in pos.board:
            if code == 0:
                continue
            v = PIECE_VALUES[code if code <= 6 else code - 6]
            mat += v if (code <= 6) == (color == WHITE) else -v
        vis = (len(self.obs_entry(pos, color)[1].visible)
               - len(self.obs_entry(pos, 1 - color)[1].visible))
        return math.tanh((ev.w_material * mat + ev.w_visibility * vis) / ev.scale)


class FowState(GameState):
    """A position anchored in the growing tree, with both players' sequence ids."""

    __slots__ = ("g", "pos", "pmax_key", "pmin_key", "_moves", "_result", "_ready")

    def __init__(self, g: FowGame, pos: Position, pmax_key: int, pmin_key: int):
        self.g = g
        self.pos = pos
        self.pmax_key = pmax_key
        self.pmin_key = pmin_key
        self._moves = None
        self._result = None
        self._ready = False

    def _analyze(self):
        if self._ready:
            return
        pos = self.pos
        board = pos.board
        if board.find(6) < 0:
            self._result, self._moves = -1, ()
        elif board.find(12) < 0:
            self._result, self._moves = 1, ()
        elif pos.halfmove >= 100:
            self._result, self._moves = 0, ()
        else:
            moves = sorted(moves_for(board, pos.stm, pos.castling, pos.ep))
            if not moves:
                self._result = 1 if pos.stm == BLACK else -1
            self._moves = tuple(moves)
        self._ready = True

    def player(self) -> int:
        self._analyze()
        if self._result is not None:
            return TERMINAL
        return PMAX if (self.pos.stm == WHITE) == (self.g.color == WHITE) else PMIN

    def actions(self):
        self._analyze()
        return self._moves

    def utility(self) -> float:
        self._analyze()
        r = self._result
        if r == 0:
            return 0.0
        return 1.0 if (r == 1) == (self.g.color == WHITE) else -1.0

    def seq_key(self, player: int):
        return self.pmax_key if player == PMAX else self.pmin_key

    def child(self, move: Move) -> "FowState":
        g = self.g
        q = apply_unchecked(self.pos, move)
        mover_is_max = (self.pos.stm == WHITE) == (g.color == WHITE)
        obs_max, _ = g.obs_entry(q, g.color)
        obs_min, _ = g.obs_entry(q, 1 - g.color)
        pmax = g.extend_seq(self.pmax_key, move if mover_is_max else None, obs_max)
        pmin = g.extend_seq(self.pmin_key, None if mover_is_max else move, obs_min)
        return FowState(g, q, pmax, pmin)

    def heuristic_value(self) -> float:
        self._analyze()
        return self.g.position_value(self.pos, self._result)

    def child_values(self) -> dict:
        self._analyze()
        g = self.g
        if not g._builtin:
            ev = g.evaluator.evaluate_children(self.pos)
            mover_is_max = (self.pos.stm == WHITE) == (g.color == WHITE)
            return {m: (v if mover_is_max else -v) for m, v in ev.values.items()}
        out = {}
        for m in self._moves:
            out[m] = g.position_value(apply_unchecked(self.pos, m))
        return out


# ---------------------------------------------------------------------------


class TreeValuation:
    """One-pass expected values and reach products over a finished search tree.

    Used between moves to price the carried-over opponent infosets without
    re-walking subtrees per infoset.
    """

    def __init__(self, tree: Tree):
        self.tree = tree
        profile = profile_from_tree(tree)
        n = len(tree.nodes)
        self.value = [0.0] * n          # maximizer's expected value below node
        self.pmin_others = [0.0] * n    # chance+pmax reach (pmin's "others")
        self.pmin_own = [0.0] * n       # pmin's own reach
        self.pmax_others = [0.0] * n    # chance+pmin reach (pmax's "others")
        order = self._topo()
        for idx in reversed(order):
            node = tree.nodes[idx]
            if node.player == TERMINAL or not node.expanded:
                self.value[idx] = node.value
                continue
            probs = self._probs(node, profile)
            v = 0.0
            for k, c in enumerate(node.children):
                v += probs[k] * self.value[c]
            if tree.gadget is not None and idx == tree.root.idx:
                v += tree.gadget.exit_contribution()
            self.value[idx] = v
        self.pmin_others[tree.root.idx] = 1.0
        self.pmin_own[tree.root.idx] = 1.0
        self.pmax_others[tree.root.idx] = 1.0
        for idx in order:
            node = tree.nodes[idx]
            if node.player == TERMINAL or not node.expanded:
                continue
            probs = self._probs(node, profile)
            for k, c in enumerate(node.children):
                if node.player == PMIN:
                    self.pmin_others[c] = self.pmin_others[idx]
                    self.pmin_own[c] = self.pmin_own[idx] * probs[k]
                    self.pmax_others[c] = self.pmax_others[idx] * probs[k]
                elif node.player == PMAX:
                    self.pmin_others[c] = self.pmin_others[idx] * probs[k]
                    self.pmin_own[c] = self.pmin_own[idx]
                    self.pmax_others[c] = self.pmax_others[idx]
                else:
                    self.pmin_others[c] = self.pmin_others[idx] * probs[k]
                    self.pmin_own[c] = self.pmin_own[idx]
                    self.pmax_others[c] = self.pmax_others[idx] * probs[k]
        self._members: dict = {}
        for node in tree.nodes:
            if node.player == PMIN and node.expanded:
                self._members.setdefault(node.state.seq_key(PMIN), []).append(node.idx)

    def _topo(self):
        tree = self.tree
        order, stack = [], [tree.root.idx]
        while stack:
            idx = stack.pop()
            order.append(idx)
            node = tree.nodes[idx]
            if node.expanded and node.children:
                stack.extend(node.children)
        return order

    def _probs(self, node, profile):
        if node.player == CHANCE:
            return node.chance_probs
        if self.tree.gadget is not None and node.idx == self.tree.root.idx:
            return self.tree.gadget.root_strategy()
        return profile(node.player, node.state.seq_key(node.player),
                       len(node.actions))

    def conditional_value(self, j_key) -> float:
        members = self._members.get(j_key, ())
        reach = sum(self.pmin_others[i] for i in members)
        if reach <= 1e-12:
            return 0.0
        return sum(self.pmin_others[i] * self.value[i] for i in members) / reach

    def cfv(self, j_key, action_index: Optional[int] = None) -> float:
        total = 0.0
        for i in self._members.get(j_key, ()):
            node = self.tree.nodes[i]
            w = self.pmin_others[i]
            if w <= 0.0:
                continue
            if action_index is None:
                total += w * self.value[i]
            else:
                total += w * self.value[node.children[action_index]]
        return total

    def gift(self, j_key) -> float:
        """Positive-part accumulated opponent mistakes along the path to J."""
        members = self._members.get(j_key, ())
        if not members:
            return 0.0
        node = self.tree.nodes[members[0]]
        prefixes = []
        cur = node
        while cur.parent >= 0:
            parent = self.tree.nodes[cur.parent]
            if parent.player == PMIN:
                prefixes.append((parent.state.seq_key(PMIN), cur.action_index))
            cur = parent
        total = 0.0
        for key, a_idx in prefixes:
            d = self.cfv(key, a_idx) - self.cfv(key)
            if d > 0.0:
                total += d
        return total

    def pmin_reach(self, j_key) -> float:
        members = self._members.get(j_key, ())
        if not members:
            return 0.0
        return self.pmin_own[members[0]]


# ---------------------------------------------------------------------------


@dataclass
class AgentConfig:
    min_infoset_size: int = 256
    expander_threads: int = 2
    c_puct: float = 1.0
    evaluator: Optional[str] = None       # None/'builtin' or an engine command
    belief_ceiling: int = 10_000_000
    seed: int = 0
    deterministic: bool = False           # iteration-budgeted, single-threaded
    det_expansions_per_ms: float = 0.25
    det_iterations_per_ms: float = 0.12
    knowledge_order: int = 2              # k in k-KLUSS (2 everywhere here)


class FogAgent:
    """One side of a FoW chess game, driven by observations from the harness."""

    def __init__(self, color: int, config: Optional[AgentConfig] = None):
        self.color = color
        self.cfg = config or AgentConfig()
        self.rng = random.Random(self.cfg.seed)
        self.game = FowGame(color, make_evaluator(self.cfg.evaluator))
        self.belief = init_belief(color)
        self.my_seq = self.game.intern(("start", color))
        self.old_tree: Optional[Tree] = None
        self.v_star = 0.0
        self.last_diagnostics: dict = {}

    # -- observation stream -------------------------------------------------
    def initial_obs(self, obs: ObservationRecord) -> None:
        pass  # the belief already starts at the known initial position

    def note_own_move(self, move: Move, obs: ObservationRecord) -> None:
        self.belief = update_own_move(self.belief, move, obs)
        obs_id = self.game.intern(("obs", obs.digest()))
        self.my_seq = self.game.extend_seq(self.my_seq, move, obs_id)

    def note_opponent_move(self, obs: ObservationRecord) -> None:
        self.belief = update_opponent_move(self.belief, obs,
                                           ceiling=self.cfg.belief_ceiling,
                                           rng=self.rng)
        obs_id = self.game.intern(("obs", obs.digest()))
        self.my_seq = self.game.extend_seq(self.my_seq, None, obs_id)

    # -- turn ---------------------------------------------------------------
    def choose_move(self, clock_ms: Optional[float] = None,
                    increment_ms: float = 0.0,
                    per_move_ms: Optional[float] = None) -> Move:
        budget = budget_turn(clock_ms if clock_ms is not None else 60_000.0,
                             increment_ms, per_move_ms)
        self.game.clear_cache()
        tree, carryover = self._construct_subgame()
        move, diag = self._search(tree, budget)
        diag.update(carryover)
        diag["possible"] = len(self.belief)
        diag["belief_overflow"] = self.belief.overflowed
        self.last_diagnostics = diag
        self.old_tree = tree
        return move

    # -- subgame construction ------------------------------------------------
    def _construct_subgame(self):
        g = self.game
        old = self.old_tree
        groups, v_alt, y_reach = [], [], []
        existing_states: dict = {}
        carried_nodes = 0
        carried_infosets = 0

        if old is not None:
            consistent = [n for n in old.nodes
                          if n.player == PMAX and n.player != TERMINAL
                          and isinstance(n.state, FowState)
                          and n.state.pmax_key == self.my_seq]
            if consistent:
                val = TreeValuation(old)
                j_keys = []
                seen = set()
                for n in consistent:
                    jk = n.state.pmin_key
                    if jk not in seen:
                        seen.add(jk)
                        j_keys.append(jk)
                by_key: dict = {}
                for n in old.nodes:
                    if isinstance(n.state, FowState) and n.state.pmin_key in seen:
                        by_key.setdefault(n.state.pmin_key, []).append(n)
                for jk in j_keys:
                    members = by_key[jk]
                    entries = [(n.idx, val.pmin_others[n.idx]) for n in members]
                    groups.append((jk, entries))
                    v_alt.append(val.conditional_value(jk) - val.gift(jk))
                    y_reach.append(val.pmin_reach(jk))
                    carried_infosets += 1
                    carried_nodes += sum(self._subtree_size(old, n.idx)
                                         for n in members)
                for n in consistent:
                    existing_states[n.state.pos.key()] = n.state.pos

        sampled = sample_infoset(self.belief, set(existing_states.values()),
                                 self.cfg.min_infoset_size, self.rng)
        fresh = 0
        for pos in sampled:
            if pos.key() in existing_states:
                continue
            fresh += 1
            pmin_key = g.intern(("fresh", self.my_seq, pos.key()))
            st = FowState(g, pos, self.my_seq, pmin_key)
            groups.append((pmin_key, [(st, 1.0)]))
            v_alt.append(min(g.position_value(pos), self.v_star))
            y_reach.append(0.0)

        alpha = resolve_priors(y_reach)
        tree = assemble_subgame(groups, v_alt, alpha,
                                previous_value=self.v_star, old_tree=old)
        return tree, {"carried_nodes": carried_nodes,
                      "carried_infosets": carried_infosets,
                      "fresh_samples": fresh,
                      "root_infosets": len(groups)}

    @staticmethod
    def _subtree_size(tree: Tree, idx: int) -> int:
        n, stack = 0, [idx]
        while stack:
            i = stack.pop()
            n += 1
            node = tree.nodes[i]
            if node.expanded and node.children:
                stack.extend(node.children)
        return n

    # -- search --------------------------------------------------------------
    def _search(self, tree: Tree, budget: TurnBudget):
        my_key = (PMAX, self.my_seq)
        solver = Solver(tree)
        tracker_box: dict = {}
        if self.cfg.deterministic:
            self._search_deterministic(tree, solver, budget, my_key, tracker_box)
        else:
            self._search_threaded(tree, solver, budget, my_key, tracker_box)
        return self._pick(tree, solver, my_key, tracker_box)

    def _observe_tracker(self, tree, my_key, tracker_box, past_half):
        rec = tree.infosets.get(my_key)
        if rec is None:
            return
        tracker = tracker_box.get("t")
        if tracker is None:
            tracker = tracker_box["t"] = StableActionTracker(len(rec.actions))
        if past_half and not tracker.active:
            tracker.start()
        tracker.observe(rec.strategy())

    def _search_deterministic(self, tree, solver, budget, my_key, tracker_box):
        rng = random.Random(self.rng.randrange(2 ** 30))
        exp = Expander(tree, rng, self.cfg.c_puct)
        n_exp = max(4, int(budget.expander_stop_ms * self.cfg.det_expansions_per_ms))
        n_iter = max(4, int(budget.total_ms * self.cfg.det_iterations_per_ms))
        half = n_iter // 2
        done_iter = 0
        while exp.expansions < n_exp and exp.steps < n_exp * 20:
            exp.step(PMAX)
            exp.step(PMIN)
            if done_iter < n_iter:
                solver.iteration()
                done_iter += 1
                self._observe_tracker(tree, my_key, tracker_box, done_iter > half)
        while done_iter < n_iter:
            solver.iteration()
            done_iter += 1
            self._observe_tracker(tree, my_key, tracker_box, done_iter > half)
        self._diag_counts = (exp.expansions, done_iter)

    def _search_threaded(self, tree, solver, budget, my_key, tracker_box):
        stop_expand = threading.Event()
        stop_solve = threading.Event()
        t0 = time.monotonic()
        half_s = budget.total_ms / 2000.0
        counts = {"expansions": 0}

        def solver_loop():
            while not stop_solve.is_set():
                solver.iteration()
                self._observe_tracker(tree, my_key, tracker_box,
                                      time.monotonic() - t0 >= half_s)

        def expander_loop(seed):
            exp = Expander(tree, random.Random(seed), self.cfg.c_puct)
            while not stop_expand.is_set():
                exp.step(PMAX)
                exp.step(PMIN)
            counts["expansions"] += exp.expansions

        threads = [threading.Thread(target=solver_loop, daemon=True)]
        for k in range(max(1, self.cfg.expander_threads)):
            threads.append(threading.Thread(
                target=expander_loop, args=(self.rng.randrange(2 ** 30),),
                daemon=True))
        for t in threads:
            t.start()
        time.sleep(max(0.0, budget.expander_stop_ms / 1000.0))
        stop_expand.set()
        remaining = budget.total_ms / 1000.0 - (time.monotonic() - t0)
        if remaining > 0:
            time.sleep(remaining)
        stop_solve.set()
        for t in threads:
            t.join()
        self._diag_counts = (counts["expansions"], solver.iterations)

    def _pick(self, tree: Tree, solver: Solver, my_key, tracker_box):
        rec = tree.infosets.get(my_key)
        diag = {"iterations": solver.iterations,
                "nodes": tree.node_count(),
                "infosets": len(tree.infosets),
                "expansions": self._diag_counts[0],
                "depth": self._max_depth(tree)}
        if rec is None:
            # nothing expanded in time: fall back to the leaf evaluator
            layer = [tree.nodes[c] for ch in tree.root.children
                     for c in tree.nodes[ch].children]
            state = layer[0].state
            vals = state.child_values()
            move = max(sorted(vals), key=lambda m: vals[m])
            self.v_star = max(vals.values())
            diag["fallback"] = True
            return move, diag

        strategy = list(rec.strategy())
        tracker = tracker_box.get("t")
        stable = tracker.stable_indices() if tracker else set(range(len(strategy)))
        resolve_active = tree.gadget.resolve_active() if tree.gadget else False
        idx = select_move_index(strategy, resolve_active, stable, self.rng)
        move = rec.actions[idx]
        # v* for the next turn: our conditional value at the root infoset
        val = TreeValuation(tree)
        reach = sum(val.pmax_others[i] for i in rec.members)
        total = sum(val.pmax_others[i] * val.value[i] for i in rec.members)
        self.v_star = total / reach if reach > 1e-12 else val.value[tree.root.idx]
        diag["resolve_active"] = resolve_active
        diag["v_star"] = self.v_star
        return move, diag

    @staticmethod
    def _max_depth(tree: Tree) -> int:
        depth = [0] * len(tree.nodes)
        best = 0
        for node in tree.nodes:
            if node.parent >= 0:
                depth[node.idx] = depth[node.parent] + 1
                if node.expanded and depth[node.idx] > best:
                    best = depth[node.idx]
        return best


class RandomAgent:
    """Uniform random mover with the same observation-driven interface."""

    def __init__(self, color: int, seed: int = 0):
        self.color = color
        self.rng = random.Random(seed)
        self._legal: tuple = ()
        self.last_diagnostics: dict = {}

    def note_own_move(self, move, obs):
        self._legal = ()

    def note_opponent_move(self, obs):
        self._legal = obs.legal

    def initial_obs(self, obs):
        self._legal = obs.legal

    def choose_move(self, clock_ms=None, increment_ms=0.0, per_move_ms=None):
        if not self._legal:
            raise RuntimeError("no legal move list available")
        return self.rng.choice(sorted(self._legal))
