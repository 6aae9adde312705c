"""Numba kernels for the hot loops (trajectory stepping, crossing counts)."""

from __future__ import annotations

from numba import njit


@njit(cache=True)
def walk_steps(pright, win_lo, pos, us, out, out_off):
    """Advance the walk while it stays inside the realized window.

    Consumes one uniform per step; stops early (without consuming) when the
    walker reaches the window rim so the caller can extend the environment.
    Returns (steps_taken, final_position).
    """
    k = 0
    n = us.shape[0]
    m = pright.shape[0]
    i = pos - win_lo
    while k < n:
        if i <= 0 or i >= m - 1:
            break
        if us[k] < pright[i]:
            pos += 1
            i += 1
        else:
            pos -= 1
            i -= 1
        out[out_off + k] = pos
        k += 1
    return k, pos


@njit(cache=True)
def straight_crossing_counts(colors, seg_start, seg_end, u_buf, stamp, crossed, stamp_base):
    """First hits and straight crossings of the period-4 intervals.

    ``colors`` holds 0/1 color codes of the observation stream; segments
    (half-open index ranges) are processed independently, each with a fresh
    interval record.  A hit is an interval entered for the first time within
    its segment; it counts as straight when the decoded path traverses that
    interval monotonically in three steps at any point of the segment.  The
    interval holding the segment's starting vertex is excluded (it was never
    entered).  Returns (hits, straight_hits).
    """
    hits = 0
    straight = 0
    for s in range(seg_start.shape[0]):
        a = seg_start[s]
        b = seg_end[s]
        L = b - a
        if L < 2:
            continue
        u = 1 if colors[a] == 0 else 2
        u_buf[0] = u
        for k in range(1, L):
            c = colors[a + k]
            r = u % 4
            up = 0 if (r == 0 or r == 3) else 1
            if c == up:
                u += 1
            else:
                u -= 1
            u_buf[k] = u
        sid = s + 1
        anchor = (u_buf[0] - 1) // 4 + stamp_base
        stamp[anchor] = sid
        for k in range(1, L):
            m = (u_buf[k] - 1) // 4 + stamp_base
            if stamp[m] != sid:
                stamp[m] = sid
                hits += 1
        for k in range(L - 3):
            d = u_buf[k + 1] - u_buf[k]
            if u_buf[k + 2] - u_buf[k + 1] == d and u_buf[k + 3] - u_buf[k + 2] == d:
                lo = u_buf[k] if d == 1 else u_buf[k + 3]
                if lo % 4 == 1:
                    m = (lo - 1) // 4 + stamp_base
                    if m != anchor and crossed[m] != sid:
                        crossed[m] = sid
                        straight += 1
    return hits, straight


@njit(cache=True)
def longest_match_at_shift(recon, truth_win, offset, anchor_idx):
    """Length of the bit-exact contiguous match containing the anchor index."""
    n = recon.shape[0]
    if offset < 0 or offset + n > truth_win.shape[0]:
        return 0
    if recon[anchor_idx] != truth_win[offset + anchor_idx]:
        return 0
    lo = anchor_idx
    while lo > 0 and recon[lo - 1] == truth_win[offset + lo - 1]:
        lo -= 1
    hi = anchor_idx
    while hi < n - 1 and recon[hi + 1] == truth_win[offset + hi + 1]:
        hi += 1
    return hi - lo + 1
