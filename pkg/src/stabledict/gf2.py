"""Arithmetic in binary fields GF(2^k) for 1 <= k <= 64.

Field elements are ints whose bit i is the coefficient of x^i.  Each width
uses a fixed modulus: the lexicographically least irreducible polynomial of
its degree (smallest integer encoding with the x^k bit set).  The table was
generated offline with a Rabin irreducibility test and is re-verified
against an independent oracle in the test suite.
"""

from __future__ import annotations

# Degree -> least irreducible polynomial over GF(2), leading bit included.
MODULUS = {
    1: 0x2, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11B,
    9: 0x203, 10: 0x409, 11: 0x805, 12: 0x1009, 13: 0x201B, 14: 0x4021,
    15: 0x8003, 16: 0x1002B, 17: 0x20009, 18: 0x40009, 19: 0x80027,
    20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021, 24: 0x100001B,
    25: 0x2000009, 26: 0x400001B, 27: 0x8000027, 28: 0x10000003,
    29: 0x20000005, 30: 0x40000003, 31: 0x80000009, 32: 0x10000008D,
    33: 0x20000004B, 34: 0x40000001B, 35: 0x800000005, 36: 0x1000000035,
    37: 0x200000003F, 38: 0x4000000063, 39: 0x8000000011, 40: 0x10000000039,
    41: 0x20000000009, 42: 0x40000000027, 43: 0x80000000059,
    44: 0x100000000021, 45: 0x20000000001B, 46: 0x400000000003,
    47: 0x800000000021, 48: 0x100000000002D, 49: 0x2000000000071,
    50: 0x400000000001D, 51: 0x800000000004B, 52: 0x10000000000009,
    53: 0x20000000000047, 54: 0x4000000000007D, 55: 0x80000000000047,
    56: 0x100000000000095, 57: 0x200000000000011, 58: 0x400000000000063,
    59: 0x80000000000007B, 60: 0x1000000000000003, 61: 0x2000000000000027,
    62: 0x4000000000000069, 63: 0x8000000000000003, 64: 0x1000000000000001B,
}


def gf_mul(a: int, b: int, k: int) -> int:
    """Product of a and b in GF(2^k)."""
    m = MODULUS[k]
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if (a >> k) & 1:
            a ^= m
    return r


def gf_double(a: int, k: int) -> int:
    """Product of a and x in GF(2^k); one shift-and-reduce step."""
    a <<= 1
    if (a >> k) & 1:
        a ^= MODULUS[k]
    return a


def gf_pow(a: int, e: int, k: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = gf_mul(r, a, k)
        a = gf_mul(a, a, k)
        e >>= 1
    return r


def gf_inv(a: int, k: int) -> int:
    """Multiplicative inverse of a nonzero element: a^(2^k - 2)."""
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(2^k)")
    return gf_pow(a, (1 << k) - 2, k)


def mul_byte_tables(a: int, k: int) -> list[list[int]]:
    """Per-byte lookup tables for fast repeated multiplication by `a`.

    Table j maps a byte value v to a * (v << 8j) in GF(2^k), so a product
    a*x is the xor of at most eight lookups.  Built in O(2048) xors via the
    doubling chain a*x^i.
    """
    nbytes = (k + 7) // 8
    # bit_prods[i] = a * x^i
    bit_prods = [0] * k
    bit_prods[0] = a
    for i in range(1, k):
        bit_prods[i] = gf_double(bit_prods[i - 1], k)
    tables = []
    for j in range(nbytes):
        tbl = [0] * 256
        width = min(8, k - 8 * j)
        for bit in range(width):
            p = bit_prods[8 * j + bit]
            step = 1 << bit
            for base in range(0, 256, 2 * step):
                for v in range(base + step, base + 2 * step):
                    tbl[v] = tbl[v - step] ^ p
        tables.append(tbl)
    return tables


def mul_with_tables(tables: list[list[int]], x: int) -> int:
    r = 0
    j = 0
    while x:
        r ^= tables[j][x & 0xFF]
        x >>= 8
        j += 1
    return r
