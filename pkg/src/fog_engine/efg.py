"""Game-agnostic extensive-form machinery shared by the solver and expanders.

The growing tree holds one node per history.  Nodes are appended to an arena
and addressed by index; once a node's ``expanded`` flag is published its
children never change, so the solver thread may traverse the expanded region
without locks while expander threads append below it.

Utilities are always stored from the maximizing player's perspective.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional

CHANCE, PMAX, PMIN, TERMINAL = 0, 1, 2, 3

_EPS = 1e-12


class GameState:
    """Protocol for game positions the tree can grow over."""

    def player(self) -> int:
        raise NotImplementedError

    def actions(self) -> tuple:
        raise NotImplementedError

    def chance_probs(self) -> tuple:
        raise NotImplementedError

    def child(self, action) -> "GameState":
        raise NotImplementedError

    def utility(self) -> float:
        """Terminal payoff for the maximizer, in [-1, +1]."""
        raise NotImplementedError

    def seq_key(self, player: int):
        """Hashable identity of `player`'s observation/action sequence."""
        raise NotImplementedError

    def heuristic_value(self) -> float:
        """Leaf estimate for the maximizer before this node is expanded."""
        return 0.0

    def child_values(self) -> dict:
        """Maximizer-perspective estimates for every child, one call per node."""
        return {a: 0.0 for a in self.actions()}


class RegretMatcher:
    """Predictive regret matching+ over a fixed action list."""

    __slots__ = ("n", "regrets", "pred", "strategy")

    def __init__(self, n: int, init_strategy: Optional[list] = None):
        self.n = n
        self.regrets = [0.0] * n
        self.pred = [0.0] * n
        if init_strategy is None:
            self.strategy = [1.0 / n] * n
        else:
            self.strategy = list(init_strategy)

    def update(self, utils) -> None:
        s = self.strategy
        n = self.n
        ev = 0.0
        for a in range(n):
            ev += s[a] * utils[a]
        regrets = self.regrets
        pred = self.pred
        total = 0.0
        for a in range(n):
            inst = utils[a] - ev
            r = regrets[a] + inst
            if r < 0.0:
                r = 0.0
            regrets[a] = r
            pred[a] = inst
            w = r + inst
            if w < 0.0:
                w = 0.0
            total += w
        if total <= 0.0:
            self.strategy = [1.0 / n] * n
        else:
            self.strategy = [max(0.0, regrets[a] + pred[a]) / total for a in range(n)]


class Infoset:
    """Per-infoset regret state plus the exploration statistics PUCT needs."""

    __slots__ = (
        "key", "player", "actions", "members", "matcher", "parent_seq",
        "seq_depth", "visited", "acc", "reach_acc", "visits", "n_a", "var_n",
        "var_mean", "var_m2", "last_cfv", "last_reach", "avg_seq",
    )

    def __init__(self, key, player, actions, parent_seq, seq_depth,
                 init_strategy=None):
        n = len(actions)
        self.key = key
        self.player = player
        self.actions = actions
        self.members: list[int] = []
        self.matcher = RegretMatcher(n, init_strategy)
        self.parent_seq = parent_seq      # (infoset key, action index) or None
        self.seq_depth = seq_depth
        self.visited = False
        self.acc = [0.0] * n              # CFV accumulator for the current sweep
        self.reach_acc = 0.0
        self.visits = 0                   # N(I): expansion-descent visits
        self.n_a = [0] * n                # N(I, a)
        # running variance of u(x,y|I,a), seeded with samples -1 and +1
        self.var_n = [2] * n
        self.var_mean = [0.0] * n
        self.var_m2 = [2.0] * n
        self.last_cfv = [0.0] * n
        self.last_reach = 0.0
        self.avg_seq = None               # sequence-form strategy sums (optional)

    def strategy(self):
        return self.matcher.strategy

    def record_descent(self, a_idx: int, sample: float) -> None:
        self.visits += 1
        self.n_a[a_idx] += 1
        n = self.var_n[a_idx] + 1
        self.var_n[a_idx] = n
        d = sample - self.var_mean[a_idx]
        self.var_mean[a_idx] += d / n
        self.var_m2[a_idx] += d * (sample - self.var_mean[a_idx])

    def variance(self, a_idx: int) -> float:
        return self.var_m2[a_idx] / self.var_n[a_idx]

    def cond_value(self, a_idx: int) -> float:
        """u(x,y|I,a) from the solver's most recent sweep through this infoset."""
        if self.last_reach <= _EPS:
            return 0.0
        return self.last_cfv[a_idx] / self.last_reach


class Node:
    __slots__ = ("idx", "parent", "action_index", "player", "state", "actions",
                 "children", "chance_probs", "value", "expanded", "new")

    def __init__(self, idx, parent, action_index, player, state, value):
        self.idx = idx
        self.parent = parent
        self.action_index = action_index
        self.player = player
        self.state = state
        self.actions = None
        self.children = None
        self.chance_probs = None
        self.value = value          # terminal payoff or leaf estimate (pmax view)
        self.expanded = False
        self.new = True


class Tree:
    """Append-only arena of nodes plus the infoset table."""

    N_LOCKS = 64

    def __init__(self, root_state: GameState):
        self.nodes: list[Node] = []
        self.infosets: dict = {}
        self.gadget = None                      # set by the subgame builder
        self._locks = [threading.Lock() for _ in range(self.N_LOCKS)]
        self._infoset_lock = threading.Lock()
        self.prune_count = 0
        self.root = self._new_node(-1, -1, root_state)
        self.root.new = False

    def _new_node(self, parent: int, action_index: int, state: GameState) -> Node:
        player = state.player()
        value = state.utility() if player == TERMINAL else state.heuristic_value()
        node = Node(len(self.nodes), parent, action_index, player, state, value)
        self.nodes.append(node)
        return node

    def node_lock(self, idx: int) -> threading.Lock:
        return self._locks[idx % self.N_LOCKS]

    def infoset_of(self, node: Node) -> Infoset:
        return self.infosets[(node.player, node.state.seq_key(node.player))]

    def infoset_for_creation(self, node: Node, init_strategy=None) -> Infoset:
        """Fetch or create the infoset `node` belongs to (expander path)."""
        key = (node.player, node.state.seq_key(node.player))
        with self._infoset_lock:
            rec = self.infosets.get(key)
            if rec is None:
                rec = Infoset(key[1], node.player, node.actions,
                              self._parent_seq(node), self._seq_depth(node),
                              init_strategy)
                self.infosets[key] = rec
            rec.members.append(node.idx)
        return rec

    def _parent_seq(self, node: Node):
        cur = self.nodes[node.parent] if node.parent >= 0 else None
        child = node
        while cur is not None:
            if cur.player == node.player:
                return (cur.state.seq_key(cur.player), child.action_index)
            child = cur
            cur = self.nodes[cur.parent] if cur.parent >= 0 else None
        return None

    def _seq_depth(self, node: Node) -> int:
        depth = 0
        cur = self.nodes[node.parent] if node.parent >= 0 else None
        while cur is not None:
            if cur.player == node.player:
                depth += 1
            cur = self.nodes[cur.parent] if cur.parent >= 0 else None
        return depth

    def expand(self, node: Node) -> bool:
        """Create all children of `node`; returns False if already expanded.

        Child initialization completes before the `expanded` flag is set, so a
        reader that observes the flag sees fully formed children.
        """
        with self.node_lock(node.idx):
            if node.expanded or node.player == TERMINAL:
                return False
            state = node.state
            actions = tuple(state.actions())
            node.actions = actions
            vals = state.child_values()
            kids = []
            for a in actions:
                child = self._new_node(node.idx, len(kids), state.child(a))
                if child.player != TERMINAL:
                    child.value = vals[a]
                kids.append(child.idx)
            if node.player == CHANCE:
                node.chance_probs = tuple(state.chance_probs())
            else:
                best = max(range(len(actions)),
                           key=lambda i: self._child_pref(node, kids[i]))
                init = [0.0] * len(actions)
                init[best] = 1.0
                self.infoset_for_creation(node, init_strategy=init)
            node.children = kids
            node.expanded = True
            return True

    def _child_pref(self, node: Node, child_idx: int) -> float:
        v = self.nodes[child_idx].value
        return v if node.player == PMAX else -v

    def strategy_at(self, node: Node):
        """Current behavioral strategy at an expanded decision node."""
        if self.gadget is not None and node.idx == self.root.idx:
            return self.gadget.root_strategy()
        return self.infoset_of(node).strategy()

    def node_count(self) -> int:
        return len(self.nodes)

    def expanded_count(self) -> int:
        return sum(1 for n in self.nodes if n.expanded)


def build_full_tree(root_state: GameState) -> Tree:
    """Fully expand a (small) game; used by oracles and tests."""
    tree = Tree(root_state)
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if node.player == TERMINAL:
            continue
        tree.expand(node)
        node.new = False
        for c in node.children:
            stack.append(tree.nodes[c])
    return tree


# ---------------------------------------------------------------------------
# analysis operations over a tree and a strategy profile
#
# A profile is a callable mapping (player, infoset key, n_actions) -> list of
# action probabilities; `profile_from_tree` reads the live matcher state.


def profile_from_tree(tree: Tree) -> Callable:
    def prof(player, key, n):
        rec = tree.infosets.get((player, key))
        if rec is None:
            return [1.0 / n] * n
        return rec.strategy()
    return prof


def uniform_profile(player, key, n):
    return [1.0 / n] * n


def _node_strategy(tree: Tree, node: Node, profile) -> list:
    if node.player == CHANCE:
        return list(node.chance_probs)
    if tree.gadget is not None and node.idx == tree.root.idx:
        return tree.gadget.root_strategy()
    return profile(node.player, node.state.seq_key(node.player), len(node.actions))


def reach_prob(tree: Tree, player: int, node: Node, profile) -> float:
    """Probability `player` plays every own action on the root -> node path."""
    prob = 1.0
    cur = node
    while cur.parent >= 0:
        parent = tree.nodes[cur.parent]
        if parent.player == player:
            prob *= _node_strategy(tree, parent, profile)[cur.action_index]
        cur = parent
    return prob


def others_reach(tree: Tree, player: int, node: Node, profile) -> float:
    """Chance-and-opponent reach probability to `node`."""
    prob = 1.0
    cur = node
    while cur.parent >= 0:
        parent = tree.nodes[cur.parent]
        if parent.player != player:
            prob *= _node_strategy(tree, parent, profile)[cur.action_index]
        cur = parent
    return prob


def expected_value(tree: Tree, node: Node, profile) -> float:
    """Maximizer's expected payoff below `node` under `profile`."""
    if node.player == TERMINAL or not node.expanded:
        return node.value
    probs = _node_strategy(tree, node, profile)
    total = sum(probs)
    v = 0.0
    for idx, c in enumerate(node.children):
        p = probs[idx]
        if p > 0.0:
            v += p * expected_value(tree, tree.nodes[c], profile)
    if tree.gadget is not None and node.idx == tree.root.idx and total < 1.0:
        v += tree.gadget.exit_contribution()
    return v


def counterfactual_value(tree: Tree, profile, player: int, key,
                         action_index: Optional[int] = None) -> float:
    """CFV of an infoset (or one of its actions): opponent-reach-weighted value."""
    members = _members_any(tree, player, key)
    if not members:
        raise KeyError(f"no nodes in infoset {key}")
    total = 0.0
    for node in members:
        w = others_reach(tree, player, node, profile)
        if w <= 0.0:
            continue
        if action_index is None:
            total += w * expected_value(tree, node, profile)
        else:
            if not node.expanded:
                raise ValueError("incomplete tree")
            child = tree.nodes[node.children[action_index]]
            total += w * expected_value(tree, child, profile)
    return total


def infoset_reach(tree: Tree, profile, player: int, key) -> float:
    return sum(others_reach(tree, player, n, profile)
               for n in _members_any(tree, player, key))


def conditional_value(tree: Tree, profile, player: int, key) -> float:
    """u(x, y | J): expected value given the infoset is reached."""
    reach = infoset_reach(tree, profile, player, key)
    if reach <= _EPS:
        return 0.0
    return counterfactual_value(tree, profile, player, key) / reach


def _members_any(tree: Tree, player: int, key) -> list[Node]:
    rec = tree.infosets.get((player, key))
    if rec is not None and rec.members:
        return [tree.nodes[i] for i in rec.members]
    out = []
    for n in tree.nodes:
        if n.player == player and n.state.seq_key(player) == key:
            out.append(n)
    return out


def best_response_value(tree: Tree, profile, player: int, key) -> float:
    """u*(x|J): the responder's best conditional value at its infoset `key`.

    `player` is the responder (whose strategy is replaced by a best response
    below the infoset); the fixed side plays `profile`.  Requires the subtree
    below the infoset to be fully expanded.
    """
    members = _members_any(tree, player, key)
    if not members:
        raise KeyError(f"no nodes in infoset {key}")
    reach_total = 0.0
    weights = {}
    for node in members:
        w = others_reach(tree, player, node, profile)
        weights[node.idx] = w
        reach_total += w
    if reach_total <= _EPS:
        n = len(members)
        weights = {node.idx: 1.0 / n for node in members}
        reach_total = 1.0

    # gather the responder's infosets below, then fold bottom-up
    groups: dict = {}
    seq_util: dict = {}
    root_util = [0.0]

    def deposit(seq, amount):
        if seq is None:
            root_util[0] += amount
        else:
            seq_util[seq] = seq_util.get(seq, 0.0) + amount

    def walk(node: Node, w: float, seq):
        if w <= 0.0:
            return
        if node.player == TERMINAL:
            deposit(seq, w * node.value)
            return
        if not node.expanded:
            raise ValueError("incomplete tree")
        if node.player == player:
            k = node.state.seq_key(player)
            grp = groups.get(k)
            if grp is None:
                grp = groups[k] = (len(node.children), seq, [])
            grp[2].append((node, w))
            for idx, c in enumerate(node.children):
                walk(tree.nodes[c], w, (k, idx))
        else:
            probs = _node_strategy(tree, node, profile)
            for idx, c in enumerate(node.children):
                p = probs[idx]
                if p > 0.0:
                    walk(tree.nodes[c], w * p, seq)

    for node in members:
        walk(node, weights[node.idx], None)

    ordered = sorted(groups.items(),
                     key=lambda kv: -_seq_len(tree, kv[1][2][0][0]))
    better = max if player == PMAX else min
    for k, (n_actions, parent_seq, _nodes) in ordered:
        vals = [seq_util.get((k, a), 0.0) for a in range(n_actions)]
        deposit(parent_seq, better(vals))
    return root_util[0] / reach_total


def full_best_response(tree: Tree, profile, player: int) -> float:
    """Root value of `player`'s best response to `profile` (pmax perspective).

    The tree must be fully expanded; unexpanded infosets in `profile` should
    fall back to something (e.g. uniform).
    """
    groups: dict = {}
    seq_util: dict = {}
    root_util = [0.0]

    def deposit(seq, amount):
        if seq is None:
            root_util[0] += amount
        else:
            seq_util[seq] = seq_util.get(seq, 0.0) + amount

    order: list = []

    def walk(node: Node, w: float, seq):
        if node.player == TERMINAL:
            deposit(seq, w * node.value)
            return
        if not node.expanded:
            raise ValueError("incomplete tree")
        if node.player == player:
            k = node.state.seq_key(player)
            if k not in groups:
                groups[k] = (len(node.children), seq)
                order.append((k, _seq_len(tree, node)))
            for idx, c in enumerate(node.children):
                walk(tree.nodes[c], w, (k, idx))
        else:
            probs = _node_strategy(tree, node, profile)
            for idx, c in enumerate(node.children):
                p = probs[idx]
                if p > 0.0:
                    walk(tree.nodes[c], w * p, seq)

    walk(tree.root, 1.0, None)
    better = max if player == PMAX else min
    for k, _depth in sorted(order, key=lambda kv: -kv[1]):
        n_actions, parent_seq = groups[k]
        deposit(parent_seq, better(seq_util.get((k, a), 0.0)
                                   for a in range(n_actions)))
    return root_util[0]


def exploitability(tree: Tree, profile) -> float:
    """Nash gap of `profile` on a fully expanded tree; zero exactly at equilibrium."""
    return full_best_response(tree, profile, PMAX) - full_best_response(tree, profile, PMIN)


def _seq_len(tree: Tree, node: Node) -> int:
    depth = 0
    cur = node
    while cur.parent >= 0:
        cur = tree.nodes[cur.parent]
        if cur.player == node.player:
            depth += 1
    return depth


def margin(tree: Tree, new_profile, blueprint, player_min_key,
           responder: int = PMIN) -> float:
    """Opponent's best-response value change at `player_min_key` vs the blueprint.

    Positive margins mean the re-solved strategy concedes the opponent no more
    than the blueprint did (the blueprint side uses u(x,y|J), not a full best
    response, which is exact when the blueprint is an equilibrium).
    """
    br = best_response_value(tree, new_profile, responder, player_min_key)
    base = conditional_value(tree, blueprint, responder, player_min_key)
    if responder == PMIN:
        return br - base
    return base - br


def gift_estimate(tree: Tree, profile, key) -> float:
    """Accumulated provable opponent mistakes on the path to Pmin infoset `key`.

    Sums, over the opponent's sequence prefixes, the positive part of how much
    the prefix action improved the maximizer's counterfactual value.
    """
    members = _members_any(tree, PMIN, key)
    if not members:
        raise KeyError(f"no nodes in infoset {key}")
    node = members[0]
    # collect (infoset key, action index) pairs for PMIN along the path
    prefixes = []
    cur = node
    while cur.parent >= 0:
        parent = tree.nodes[cur.parent]
        if parent.player == PMIN:
            prefixes.append((parent.state.seq_key(PMIN), cur.action_index))
        cur = parent
    total = 0.0
    for j_key, a_idx in prefixes:
        u_seq = counterfactual_value(tree, profile, PMIN, j_key, a_idx)
        u_set = counterfactual_value(tree, profile, PMIN, j_key)
        d = u_seq - u_set
        if d > 0.0:
            total += d
    return total
