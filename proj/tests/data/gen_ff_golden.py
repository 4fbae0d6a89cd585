#!/usr/bin/env python3
"""Independent transcription of the Firefighters transition and reward tables.

Writes the exhaustive (state, action) dump used as the golden reference by the
C++ environment tests. State index = (((fi*5 + oc)*2 + eq)*2 + kn)*4 + ffc.
Actions: 0 evacuate, 1 contain, 2 aggressive suppression, 3 prepare equipment,
4 update knowledge.
"""
import itertools
import sys


def transition(s, a):
    fi, oc, eq, kn, ffc = s
    nfi, noc, neq, nkn, nffc = s
    if a == 0:
        noc = max(0, oc - 1)
        if fi >= 3 and eq == 0 and kn == 0:
            nffc = max(0, ffc - 1)
        if fi == 5:
            neq = 0
    elif a == 1:
        nfi = max(0, fi - 1)
    elif a == 2:
        nfi = max(0, fi - 2)
        if fi >= 3 and (eq == 0 or kn == 0):
            nffc = max(0, ffc - 1)
        if fi == 5:
            neq = 0
    elif a == 3:
        neq = 1
    elif a == 4:
        nkn = 1
    return (nfi, noc, neq, nkn, nffc)


def reward(s, a, ns):
    fi, oc, eq, kn, ffc = s
    if ns[4] == 0:
        return (-1.0, -1.0)
    if a == 0:
        return (-1.0, -1.0) if oc == 0 else (1.0 - 0.2 * fi - 0.1 * kn, 1.0)
    if a == 1:
        return (-1.0, -1.0) if fi == 0 else (0.8, 0.2)
    if a == 2:
        if fi == 0:
            return (-1.0, -1.0)
        return (0.3, 0.7) if eq == 0 else (0.6, 0.7)
    if a == 3:
        return (0.5, -0.1) if eq == 0 else (-1.0, -1.0)
    return (1.0, -0.5) if kn == 0 else (-1.0, -1.0)


def index(s):
    fi, oc, eq, kn, ffc = s
    return (((fi * 5 + oc) * 2 + eq) * 2 + kn) * 4 + ffc


def terminal(s):
    return (s[0] == 0 and s[1] == 0) or s[4] == 0


def main(out):
    rows = []
    for s in itertools.product(range(5), range(5), range(2), range(2), range(4)):
        for a in range(5):
            ns = transition(s, a)
            r = reward(s, a, ns)
            rows.append((index(s), a, index(ns), r[0], r[1], int(terminal(ns))))
    rows.sort()
    out.write("state_index,action_index,next_state_index,r_professionalism,r_proximity,terminal_flag\n")
    for r in rows:
        out.write(f"{r[0]},{r[1]},{r[2]},{r[3]!r},{r[4]!r},{r[5]}\n")


if __name__ == "__main__":
    main(sys.stdout)
