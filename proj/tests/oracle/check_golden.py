"""Re-derives the golden vectors from their seeds with the pure-Python oracle.

Every block hash, block signature, record signature, post_id and canonical
encoding is recomputed here without touching the C++ code and compared
byte for byte with the checked-in files.
"""

import hashlib
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import secp256k1_oracle as ec  # noqa: E402


def json_string(s):
    out = ['"']
    for ch in s:
        c = ord(ch)
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\b":
            out.append("\\b")
        elif ch == "\f":
            out.append("\\f")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif c < 0x20:
            out.append("\\u%04x" % c)
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def body_text(kind, body):
    if kind == "post":
        parts = [
            '"client_time":%d' % body["client_time"],
            '"content":' + json_string(body["content"]),
            '"post_id":"%s"' % body["post_id"],
        ]
        if "reply_to" in body:
            parts.append('"reply_to":"%s"' % body["reply_to"])
    elif kind == "delete_marker":
        parts = ['"target":"%s"' % body["target"]]
    elif kind == "identity":
        parts = ['"name":' + json_string(body["name"])]
        if "profile" in body:
            parts.append('"profile":' + json_string(body["profile"]))
    else:
        raise ValueError("unknown kind " + kind)
    return "{" + ",".join(parts) + "}"


def signing_text(rec):
    return '{"body":%s,"kind":"%s"}' % (body_text(rec["kind"], rec["body"]), rec["kind"])


def record_text(rec):
    return '{"author_pub":"%s","author_sig":"%s","body":%s,"kind":"%s"}' % (
        rec["author_pub"],
        rec["author_sig"],
        body_text(rec["kind"], rec["body"]),
        rec["kind"],
    )


def genesis_payload(pub, label):
    return '{"kind":"genesis","label":%s,"owner_pub":"%s"}' % (json_string(label), pub.hex())


def fail(msg):
    print("FAIL:", msg)
    sys.exit(1)


def main(directory):
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as f:
        manifest = json.load(f)
    owner_d = ec.scalar_from_seed(bytes.fromhex(manifest["owner_seed"]))
    owner_pub = ec.public_key(owner_d)
    chain_id = ec.chain_id(owner_pub)
    authors = {}
    for seed in manifest["author_seeds"]:
        d = ec.scalar_from_seed(bytes.fromhex(seed))
        authors[ec.public_key(d).hex()] = d

    with open(os.path.join(directory, manifest["records_file"]), encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines[-1] != "":
        fail("records file must end with a newline")
    records = []
    for i, line in enumerate(lines[:-1]):
        rec = json.loads(line)
        if record_text(rec) != line:
            fail("record %d is not in canonical form" % i)
        d = authors.get(rec["author_pub"])
        if d is None:
            fail("record %d has an unknown author" % i)
        digest = hashlib.sha256(signing_text(rec).encode("utf-8")).digest()
        sig = ec.sign(d, digest)
        if sig.hex() != rec["author_sig"]:
            fail("record %d signature differs from the RFC 6979 oracle" % i)
        if not ec.verify(bytes.fromhex(rec["author_pub"]), digest, sig):
            fail("record %d does not verify" % i)
        if rec["kind"] == "post":
            body = rec["body"]
            pid = hashlib.sha256(
                bytes.fromhex(rec["author_pub"]) + body["content"].encode("utf-8") + body["client_time"].to_bytes(8, "big")
            ).hexdigest()
            if pid != body["post_id"]:
                fail("record %d post_id mismatch" % i)
        records.append(line)

    with open(os.path.join(directory, manifest["blocks_file"]), encoding="ascii") as f:
        block_lines = [l for l in f.read().split("\n") if l]
    prev_hash = bytes(32)
    prev_time = None
    for h, line in enumerate(block_lines):
        raw = bytes.fromhex(line)
        if raw[0] != 1:
            fail("block %d version" % h)
        if raw[1:33] != chain_id:
            fail("block %d chain id" % h)
        height = int.from_bytes(raw[33:41], "big")
        time = int.from_bytes(raw[41:49], "big")
        prev = raw[49:81]
        length = int.from_bytes(raw[81:85], "big")
        if len(raw) != 85 + length + 64:
            fail("block %d length field" % h)
        payload = raw[85 : 85 + length]
        sig = raw[85 + length :]
        if height != h:
            fail("block %d height" % h)
        if prev != prev_hash:
            fail("block %d prev_hash" % h)
        if prev_time is not None and time <= prev_time:
            fail("block %d time" % h)
        digest = hashlib.sha256(raw[: 85 + length]).digest()
        if ec.sign(owner_d, digest) != sig:
            fail("block %d signature differs from the RFC 6979 oracle" % h)
        if not ec.verify(owner_pub, digest, sig):
            fail("block %d does not verify" % h)
        if h == 0:
            if time != manifest["genesis_time"]:
                fail("genesis time")
            if payload.decode("utf-8") != genesis_payload(owner_pub, manifest["label"]):
                fail("genesis payload")
        ids = manifest["block_records"][h]
        if ids:
            expected = "[" + ",".join(records[i] for i in ids) + "]"
            if payload.decode("utf-8") != expected:
                fail("block %d payload is not the canonical record array" % h)
        prev_hash = digest
        prev_time = time

    if len(block_lines) < 20 or len(records) < 20:
        fail("corpus too small: %d blocks, %d records" % (len(block_lines), len(records)))
    print("golden vectors re-derived: %d blocks, %d records, chain %s" % (len(block_lines), len(records), chain_id.hex()))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "golden"))
