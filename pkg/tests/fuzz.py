"""Byte-level mutation fuzzing for the case and CSV parsers."""
import numpy as np

from flexopf.caseio import CaseError, attach_profile, parse_matpower, parse_native, parse_scenarios

_TOKENS = [b"[", b"]", b";", b"{", b"}", b",", b"\"", b"\n", b"\r\n", b"%", b"-", b"0", b"1e999",
           b"nan", b"-inf", b"null", b"mpc.bus = [", b"1 3 0 0", b"\x00", b"\xff", b"9" * 40]


def mutate(data: bytes, rng: np.random.Generator) -> bytes:
    buf = bytearray(data)
    for _ in range(int(rng.integers(1, 6))):
        op = int(rng.integers(0, 5))
        pos = int(rng.integers(0, len(buf) + 1))
        if op == 0 and buf:                                  # flip a byte
            buf[min(pos, len(buf) - 1)] = int(rng.integers(0, 256))
        elif op == 1:                                        # delete a span
            del buf[pos:pos + int(rng.integers(1, 40))]
        elif op == 2:                                        # insert a token
            buf[pos:pos] = _TOKENS[int(rng.integers(0, len(_TOKENS)))]
        elif op == 3 and buf:                                # duplicate a span
            end = min(len(buf), pos + int(rng.integers(1, 80)))
            buf[pos:pos] = buf[pos:end]
        else:                                                # truncate
            del buf[pos:]
    return bytes(buf)


def run(parse, seeds: list, n: int, seed: int) -> dict:
    """Feed ``n`` mutants to ``parse``; any non-CaseError exception propagates."""
    rng = np.random.default_rng(seed)
    stats = {"accepted": 0, "rejected": 0}
    for k in range(n):
        data = mutate(seeds[k % len(seeds)], rng)
        try:
            parse(data)
            stats["accepted"] += 1
        except CaseError:
            stats["rejected"] += 1
    return stats


def matpower_bytes(data: bytes):
    return parse_matpower(data.decode("latin-1"))


def native_bytes(data: bytes):
    return parse_native(data)


def scenario_bytes(data: bytes):
    return parse_scenarios(data)


def profile_bytes_for(network):
    def parse(data: bytes):
        return attach_profile(network, data)
    return parse
