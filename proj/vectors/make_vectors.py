#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
# Copyright (c) 2026 The edgepipe Authors
"""Writes the golden wire vectors from the byte layout alone (struct, LE).

Kept independent of the C++ encoder on purpose: the tests decode these files
and re-encode the result, so both directions are checked against bytes that
were never produced by the code under test.
"""
import pathlib
import struct

OUT = pathlib.Path(__file__).resolve().parent

F32, F64, I32, I64, U8 = 1, 2, 3, 4, 5
FMT = {F32: "f", F64: "d", I32: "i", I64: "q", U8: "B"}


def tensor(dtype, dims, values):
    b = struct.pack("<BB", dtype, len(dims))
    b += b"".join(struct.pack("<I", d) for d in dims)
    b += b"".join(struct.pack("<" + FMT[dtype], v) for v in values)
    return b


def frame(kind, payload):
    return struct.pack("<BQ", kind, len(payload)) + payload


def short_str(s):
    s = s.encode()
    return struct.pack("<H", len(s)) + s


def long_bytes(b):
    return struct.pack("<I", len(b)) + b


VECTORS = {
    "tensor_f32_2x2": (
        tensor(F32, [2, 2], [1.0, 2.0, 3.0, 4.0]),
        "F32 tensor shape (2,2) values [[1,2],[3,4]]"),
    "tensor_f64_scalar": (
        tensor(F64, [], [-0.5]),
        "F64 rank-0 tensor value -0.5"),
    "tensor_i64_3": (
        tensor(I64, [3], [-1, 0, 7]),
        "I64 tensor shape (3) values [-1,0,7]"),
    "tensor_i32_2x1": (
        tensor(I32, [2, 1], [-2147483648, 2147483647]),
        "I32 tensor shape (2,1) values [INT32_MIN, INT32_MAX]"),
    "tensor_u8_2x0": (
        tensor(U8, [2, 0], []),
        "U8 tensor shape (2,0), no elements"),
    "frame_tensor_f32_2x2": (
        frame(0x01, tensor(F32, [2, 2], [1.0, 2.0, 3.0, 4.0])),
        "TENSOR frame (kind 0x01, length 26) wrapping tensor_f32_2x2"),
    "frame_hello_host": (
        frame(0x02, struct.pack("<HHB", 1, 0, 0)),
        "HELLO frame: version 1.0, role host (0)"),
    "frame_step": (
        frame(0x07, struct.pack("<d", 0.01)),
        "STEP frame: lr 0.01"),
    "frame_shutdown": (
        frame(0x0E, b""),
        "SHUTDOWN frame, empty payload"),
    "frame_error_tool": (
        frame(0x0F, struct.pack("<H", 0x8000 | 21) + long_bytes(b"no tool named 'x'")),
        "ERROR frame: code 21 (unknown tool) with the tool-lane bit 0x8000, message \"no tool named 'x'\""),
    "frame_tool_begin": (
        frame(0x0A, struct.pack("<B", 0) + short_str("vector_search")
              + long_bytes(struct.pack("<I", 2) + long_bytes(b"phone chip")) + struct.pack("<d", 0.0)),
        "TOOL_BEGIN frame: op call (0), tool vector_search, args {k=2, query \"phone chip\"}, delay 0"),
    "frame_fwdbwd_req": (
        frame(0x05, struct.pack("<IIQ", 3, 1, 42)
              + tensor(F32, [1, 2], [0.25, -1.5]) + tensor(I64, [1], [1])),
        "FWDBWD_REQ frame: batch 3, microbatch 1, seed 42, activations F32 (1,2) [0.25,-1.5], labels I64 (1) [1]"),
    "bad_unknown_dtype": (
        bytes([0xFF, 0x01, 0x01, 0x00, 0x00, 0x00, 0x00]),
        "tensor encoding with dtype byte 0xFF: unknown dtype error naming 0xFF"),
    "bad_truncated_header": (
        bytes([0x01, 0x02, 0x02, 0x00, 0x00]),
        "tensor encoding cut inside the dims: header truncation error"),
    "bad_truncated_payload": (
        tensor(F32, [2, 2], [1.0, 2.0, 3.0, 4.0])[:-3],
        "tensor_f32_2x2 missing its last 3 bytes: payload truncation error"),
    "bad_frame_truncated_header": (
        bytes([0x01, 0x1A, 0x00, 0x00]),
        "frame envelope cut after 4 of 9 header bytes: header truncation error"),
    "bad_frame_unknown_kind": (
        frame(0x7F, b"\x00\x01"),
        "frame kind 0x7F with a 2-byte payload: protocol error, payload skipped"),
}

if __name__ == "__main__":
    for name, (data, text) in VECTORS.items():
        (OUT / f"{name}.bin").write_bytes(data)
        (OUT / f"{name}.txt").write_text(text + "\n" + data.hex(" ") + "\n")
