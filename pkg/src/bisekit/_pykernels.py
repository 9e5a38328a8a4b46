"""Pure-Python walk stepping, used when the compiled module is unavailable."""


def walk_chunk(indptr, indices, cumprob, hold, node, clock, uniforms, record_times, out, k):
    indptr = indptr.tolist()
    indices = indices.tolist()
    cum = cumprob.tolist()
    hold = hold.tolist()
    times = record_times.tolist()
    us = uniforms.tolist()
    nrec, nu = len(times), len(us)
    weighted = len(cum) > 0
    used = 0
    node = int(node)
    while k < nrec:
        nxt = clock + hold[node]
        while k < nrec and times[k] < nxt:
            out[k] = node
            k += 1
        if k >= nrec or used == nu:
            break
        u = us[used]
        used += 1
        lo, hi = indptr[node], indptr[node + 1]
        deg = hi - lo
        if deg > 0:
            if weighted:
                j = lo
                while j < hi - 1 and cum[j] <= u:
                    j += 1
            else:
                j = min(lo + int(u * deg), hi - 1)
            node = indices[j]
        clock = nxt
    return node, clock, k, used
