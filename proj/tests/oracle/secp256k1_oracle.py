"""Pure-Python secp256k1 / ECDSA reference used only by tests.

Shares no code with the C++ implementation: field and group arithmetic,
RFC 6979 nonces and low-s normalization are written out from the curve
definition, and hashing uses hashlib.
"""

import hashlib
import hmac

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
G = (
    0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)


def _add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    (x1, y1), (x2, y2) = p1, p2
    if x1 == x2 and (y1 + y2) % P == 0:
        return None
    if p1 == p2:
        lam = 3 * x1 * x1 * pow(2 * y1, P - 2, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, P - 2, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return (x3, (lam * (x1 - x3) - y1) % P)


def mul(k, point=G):
    result = None
    addend = point
    while k:
        if k & 1:
            result = _add(result, addend)
        addend = _add(addend, addend)
        k >>= 1
    return result


def compress(point):
    x, y = point
    return bytes([2 + (y & 1)]) + x.to_bytes(32, "big")


def decompress(data):
    if len(data) != 33 or data[0] not in (2, 3):
        return None
    x = int.from_bytes(data[1:], "big")
    if x >= P:
        return None
    y2 = (pow(x, 3, P) + 7) % P
    y = pow(y2, (P + 1) // 4, P)
    if y * y % P != y2:
        return None
    if (y & 1) != (data[0] & 1):
        y = P - y
    return (x, y)


def scalar_from_seed(seed):
    d = int.from_bytes(seed, "big") % N
    if d == 0:
        raise ValueError("invalid-seed")
    return d


def public_key(d):
    return compress(mul(d))


def chain_id(pub):
    return hashlib.sha256(pub).digest()


def _rfc6979_nonces(d, msg32):
    """RFC 6979 HMAC-SHA256 stream seeded with key || message (message bytes
    taken verbatim, as libsecp256k1 does)."""
    x = d.to_bytes(32, "big")
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + x + msg32, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + x + msg32, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(k, v, hashlib.sha256).digest()
        yield int.from_bytes(v, "big")
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


def sign(d, msg32):
    z = int.from_bytes(msg32, "big") % N
    for nonce in _rfc6979_nonces(d, msg32):
        if not 0 < nonce < N:
            continue
        r = mul(nonce)[0] % N
        if r == 0:
            continue
        s = pow(nonce, N - 2, N) * (z + r * d) % N
        if s == 0:
            continue
        if s > N // 2:
            s = N - s
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")


def verify(pub, msg32, sig):
    point = decompress(pub)
    if point is None or len(sig) != 64:
        return False
    r = int.from_bytes(sig[:32], "big")
    s = int.from_bytes(sig[32:], "big")
    if not (0 < r < N and 0 < s <= N // 2):
        return False
    z = int.from_bytes(msg32, "big") % N
    w = pow(s, N - 2, N)
    pt = _add(mul(z * w % N), mul(r * w % N, point))
    return pt is not None and pt[0] % N == r


if __name__ == "__main__":
    d = scalar_from_seed(b"\x01" * 32)
    pub = public_key(d)
    print("seed 0x01*32 pub", pub.hex())
    print("chain_id", chain_id(pub).hex())
