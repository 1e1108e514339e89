"""Slow pure-Python Argon2 (version 0x13), used only as a test oracle.

Written from RFC 9106 independently of the C library wrapped by argon2-cffi,
so digests produced by :mod:`macanon.anonymizer` can be cross-checked.
"""

from hashlib import blake2b

_M64 = (1 << 64) - 1
_M32 = (1 << 32) - 1
_BLOCK_WORDS = 128
_SYNC_POINTS = 4
TYPES = {"argon2d": 0, "argon2i": 1, "argon2id": 2}


def _le32(x):
    return x.to_bytes(4, "little")


def _h_prime(data, length):
    if length <= 64:
        return blake2b(_le32(length) + data, digest_size=length).digest()
    r = -(-length // 32) - 2
    v = blake2b(_le32(length) + data, digest_size=64).digest()
    out = [v[:32]]
    for _ in range(r - 1):
        v = blake2b(v, digest_size=64).digest()
        out.append(v[:32])
    out.append(blake2b(v, digest_size=length - 32 * r).digest())
    return b"".join(out)


def _gb(v, a, b, c, d):
    va, vb, vc, vd = v[a], v[b], v[c], v[d]
    va = (va + vb + 2 * (va & _M32) * (vb & _M32)) & _M64
    vd ^= va
    vd = ((vd >> 32) | (vd << 32)) & _M64
    vc = (vc + vd + 2 * (vc & _M32) * (vd & _M32)) & _M64
    vb ^= vc
    vb = ((vb >> 24) | (vb << 40)) & _M64
    va = (va + vb + 2 * (va & _M32) * (vb & _M32)) & _M64
    vd ^= va
    vd = ((vd >> 16) | (vd << 48)) & _M64
    vc = (vc + vd + 2 * (vc & _M32) * (vd & _M32)) & _M64
    vb ^= vc
    vb = ((vb >> 63) | (vb << 1)) & _M64
    v[a], v[b], v[c], v[d] = va, vb, vc, vd


def _permute(v):
    _gb(v, 0, 4, 8, 12)
    _gb(v, 1, 5, 9, 13)
    _gb(v, 2, 6, 10, 14)
    _gb(v, 3, 7, 11, 15)
    _gb(v, 0, 5, 10, 15)
    _gb(v, 1, 6, 11, 12)
    _gb(v, 2, 7, 8, 13)
    _gb(v, 3, 4, 9, 14)


_ROWS = [[16 * i + k for k in range(16)] for i in range(8)]
_COLS = [[16 * i + 2 * j + k for i in range(8) for k in (0, 1)] for j in range(8)]


def _compress(x, y, old=None):
    r = [a ^ b for a, b in zip(x, y)]
    q = list(r)
    for idx in _ROWS + _COLS:
        v = [q[i] for i in idx]
        _permute(v)
        for i, w in zip(idx, v):
            q[i] = w
    out = [a ^ b for a, b in zip(q, r)]
    if old is not None:
        out = [a ^ b for a, b in zip(out, old)]
    return out


def _words(data):
    return [int.from_bytes(data[8 * i:8 * i + 8], "little") for i in range(_BLOCK_WORDS)]


def _bytes(words):
    return b"".join(w.to_bytes(8, "little") for w in words)


def argon2(password, salt, *, time_cost, memory_cost, parallelism, tag_length,
           variant="argon2d", secret=b"", associated_data=b""):
    y = TYPES[variant]
    h0 = blake2b(
        _le32(parallelism) + _le32(tag_length) + _le32(memory_cost) + _le32(time_cost)
        + _le32(0x13) + _le32(y)
        + _le32(len(password)) + password + _le32(len(salt)) + salt
        + _le32(len(secret)) + secret + _le32(len(associated_data)) + associated_data,
        digest_size=64,
    ).digest()

    blocks_total = 4 * parallelism * (memory_cost // (4 * parallelism))
    lane_length = blocks_total // parallelism
    segment_length = lane_length // _SYNC_POINTS
    mem = [[None] * lane_length for _ in range(parallelism)]
    for lane in range(parallelism):
        for j in (0, 1):
            mem[lane][j] = _words(_h_prime(h0 + _le32(j) + _le32(lane), 1024))

    zero = [0] * _BLOCK_WORDS
    for pas in range(time_cost):
        for sl in range(_SYNC_POINTS):
            for lane in range(parallelism):
                independent = y == 1 or (y == 2 and pas == 0 and sl < _SYNC_POINTS // 2)
                addresses = None
                inp = None
                if independent:
                    inp = [pas, lane, sl, blocks_total, time_cost, y] + [0] * (_BLOCK_WORDS - 6)

                def next_addresses():
                    inp[6] += 1
                    return _compress(zero, _compress(zero, inp))

                start = 0
                if pas == 0 and sl == 0:
                    start = 2
                    if independent:
                        addresses = next_addresses()
                for i in range(start, segment_length):
                    cur = sl * segment_length + i
                    prev = cur - 1 if cur > 0 else lane_length - 1
                    if independent:
                        if i % _BLOCK_WORDS == 0:
                            addresses = next_addresses()
                        rand = addresses[i % _BLOCK_WORDS]
                    else:
                        rand = mem[lane][prev][0]
                    ref_lane = (rand >> 32) % parallelism
                    if pas == 0 and sl == 0:
                        ref_lane = lane
                    same = ref_lane == lane
                    if pas == 0:
                        if sl == 0:
                            area = i - 1
                        elif same:
                            area = sl * segment_length + i - 1
                        else:
                            area = sl * segment_length - (1 if i == 0 else 0)
                    else:
                        if same:
                            area = lane_length - segment_length + i - 1
                        else:
                            area = lane_length - segment_length - (1 if i == 0 else 0)
                    rel = rand & _M32
                    rel = (rel * rel) >> 32
                    rel = area - 1 - ((area * rel) >> 32)
                    begin = 0
                    if pas != 0 and sl != _SYNC_POINTS - 1:
                        begin = (sl + 1) * segment_length
                    ref_index = (begin + rel) % lane_length
                    old = mem[lane][cur] if pas > 0 else None
                    mem[lane][cur] = _compress(mem[lane][prev], mem[ref_lane][ref_index], old)

    final = list(mem[0][lane_length - 1])
    for lane in range(1, parallelism):
        final = [a ^ b for a, b in zip(final, mem[lane][lane_length - 1])]
    return _h_prime(_bytes(final), tag_length)
