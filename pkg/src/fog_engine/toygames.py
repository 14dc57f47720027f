"""Small benchmark games: Kuhn poker, matching pennies, and random trees.

These drive the solver and expansion tests.  Each game is a table of explicit
nodes; sequence keys are precomputed per player so infosets are exact.
"""

from __future__ import annotations

import itertools
import random

from .efg import CHANCE, GameState, PMAX, PMIN, TERMINAL


class TabularState(GameState):
    __slots__ = ("game", "nid")

    def __init__(self, game, nid):
        self.game = game
        self.nid = nid

    def player(self):
        return self.game.players[self.nid]

    def actions(self):
        return self.game.actions[self.nid]

    def chance_probs(self):
        return self.game.probs[self.nid]

    def child(self, action):
        return TabularState(self.game, self.game.children[self.nid][action])

    def utility(self):
        return self.game.utils[self.nid]

    def seq_key(self, player):
        return self.game.seqs[self.nid][player]

    def heuristic_value(self):
        return self.game.leaf_values.get(self.nid, 0.0)

    def child_values(self):
        out = {}
        for a in self.game.actions[self.nid]:
            cid = self.game.children[self.nid][a]
            if self.game.players[cid] == TERMINAL:
                out[a] = self.game.utils[cid]
            else:
                out[a] = self.game.leaf_values.get(cid, 0.0)
        return out


class TabularGame:
    """Explicit extensive-form game over integer node ids."""

    def __init__(self):
        self.players = []     # nid -> CHANCE/PMAX/PMIN/TERMINAL
        self.actions = []     # nid -> tuple of action labels
        self.children = []    # nid -> {action: nid}
        self.probs = []       # nid -> tuple of chance probabilities
        self.utils = []       # nid -> terminal payoff (pmax view)
        self.seqs = []        # nid -> {player: sequence key}
        self.leaf_values = {}

    def add_node(self, player, seq_max, seq_min, actions=(), probs=(), util=0.0):
        nid = len(self.players)
        self.players.append(player)
        self.actions.append(tuple(actions))
        self.children.append({})
        self.probs.append(tuple(probs))
        self.utils.append(util)
        self.seqs.append({PMAX: seq_max, PMIN: seq_min})
        return nid

    def link(self, parent, action, child):
        self.children[parent][action] = child

    def root_state(self):
        return TabularState(self, 0)

    def size(self):
        return len(self.players)


def _extend(seq, obs):
    return (seq, obs)


def kuhn_poker() -> TabularGame:
    """Standard Kuhn poker with raw +-1 / +-2 payoffs (value is -1/18 for P1)."""
    g = TabularGame()
    root = g.add_node(CHANCE, ("root",), ("root",),
                      actions=tuple(itertools.permutations((0, 1, 2), 2)),
                      probs=(1 / 6,) * 6)

    def terminal(sm, sn, u):
        return g.add_node(TERMINAL, sm, sn, util=float(u))

    for deal in itertools.permutations((0, 1, 2), 2):
        c1, c2 = deal
        s1 = _extend(("root",), ("card", c1))
        s2 = _extend(("root",), ("card", c2))
        showdown = 1 if c1 > c2 else -1
        n1 = g.add_node(PMAX, s1, s2, actions=("check", "bet"))
        g.link(root, deal, n1)
        # P1 checks
        s1c = _extend(s1, "check")
        s2c = _extend(s2, "check")
        n2 = g.add_node(PMIN, s1c, s2c, actions=("check", "bet"))
        g.link(n1, "check", n2)
        g.link(n2, "check", terminal(_extend(s1c, "check"), _extend(s2c, "check"),
                                     showdown))
        s1cb = _extend(s1c, "bet")
        s2cb = _extend(s2c, "bet")
        n3 = g.add_node(PMAX, s1cb, s2cb, actions=("fold", "call"))
        g.link(n2, "bet", n3)
        g.link(n3, "fold", terminal(_extend(s1cb, "fold"), _extend(s2cb, "fold"), -1))
        g.link(n3, "call", terminal(_extend(s1cb, "call"), _extend(s2cb, "call"),
                                    2 * showdown))
        # P1 bets
        s1b = _extend(s1, "bet")
        s2b = _extend(s2, "bet")
        n4 = g.add_node(PMIN, s1b, s2b, actions=("fold", "call"))
        g.link(n1, "bet", n4)
        g.link(n4, "fold", terminal(_extend(s1b, "fold"), _extend(s2b, "fold"), 1))
        g.link(n4, "call", terminal(_extend(s1b, "call"), _extend(s2b, "call"),
                                    2 * showdown))
    return g


def matching_pennies() -> TabularGame:
    g = TabularGame()
    root = g.add_node(PMAX, ("r",), ("r",), actions=("heads", "tails"))
    for a in ("heads", "tails"):
        # the minimizer does not observe the maximizer's pick
        n = g.add_node(PMIN, _extend(("r",), a), _extend(("r",), "hidden"),
                       actions=("heads", "tails"))
        g.link(root, a, n)
        for b in ("heads", "tails"):
            u = 1.0 if a == b else -1.0
            t = g.add_node(TERMINAL, _extend(_extend(("r",), a), b),
                           _extend(_extend(("r",), "hidden"), b), util=u)
            g.link(n, b, t)
    return g


def matrix_game(payoffs) -> TabularGame:
    """Zero-sum matrix game: pmax picks a row, pmin a column (unobserved)."""
    g = TabularGame()
    rows = tuple(range(len(payoffs)))
    cols = tuple(range(len(payoffs[0])))
    root = g.add_node(PMAX, ("r",), ("r",), actions=rows)
    for i in rows:
        n = g.add_node(PMIN, _extend(("r",), i), _extend(("r",), "h"), actions=cols)
        g.link(root, i, n)
        for j in cols:
            t = g.add_node(TERMINAL, _extend(_extend(("r",), i), j),
                           _extend(_extend(("r",), "h"), j),
                           util=float(payoffs[i][j]))
            g.link(n, j, t)
    return g


def random_game(rng: random.Random, max_nodes: int = 500, depth: int = 6,
                branching=(2, 3), obs_symbols: int = 2,
                chance_frac: float = 0.15) -> TabularGame:
    """Random two-player zero-sum game with imperfect information.

    Each move emits an observation symbol to the non-acting player; small
    alphabets collide and create genuine infosets.  The acting player and the
    action count are functions of depth and of the actor's own sequence, so
    the usual extensive-form consistency axioms hold by construction.  Chance
    outcomes are public, which keeps |I ∩ J| <= 1.
    """
    while True:
        g = _random_game_once(rng, depth, branching, obs_symbols, chance_frac)
        if g.size() <= max_nodes:
            return g
        depth -= 1


def _random_game_once(rng, depth, branching, obs_symbols, chance_frac):
    g = TabularGame()
    roles = []
    for _d in range(depth):
        if rng.random() < chance_frac:
            roles.append(CHANCE)
        else:
            roles.append(PMAX if rng.random() < 0.5 else PMIN)
    k_for_seq: dict = {}

    def n_actions(seq):
        if seq not in k_for_seq:
            k_for_seq[seq] = rng.randint(*branching)
        return k_for_seq[seq]

    def grow(seq_max, seq_min, d):
        if d == 0:
            return g.add_node(TERMINAL, seq_max, seq_min, util=rng.uniform(-1, 1))
        player = roles[depth - d]
        if player == CHANCE:
            k = n_actions(("chance", seq_max, seq_min))
            actions = tuple(range(k))
            raw = [rng.random() + 0.1 for _ in actions]
            tot = sum(raw)
            nid = g.add_node(CHANCE, seq_max, seq_min, actions=actions,
                             probs=tuple(w / tot for w in raw))
        else:
            own = seq_max if player == PMAX else seq_min
            k = n_actions((player, own))
            actions = tuple(range(k))
            nid = g.add_node(player, seq_max, seq_min, actions=actions)
        for a in actions:
            obs = rng.randrange(obs_symbols)
            if player == PMAX:
                sm = _extend(seq_max, ("a", a))
                sn = _extend(seq_min, ("o", obs))
            elif player == PMIN:
                sm = _extend(seq_max, ("o", obs))
                sn = _extend(seq_min, ("a", a))
            else:
                sm = _extend(seq_max, ("c", a))
                sn = _extend(seq_min, ("c", a))
            g.link(nid, a, grow(sm, sn, d - 1))
        return nid

    grow(("root",), ("root",), depth)
    return g
