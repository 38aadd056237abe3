import os
import random
import socket

import numpy as np
import pytest

from armoury.cipher import SCALED_579, sco
from armoury.keysearch import KeyPool, attack_keys
from armoury.oracle import (DECODE, ERR_BAD_KEY, ERR_POOL_RANGE, ERR_UNKNOWN_OPCODE, Frame,
                            LoopbackChannel, SocketChannel, OracleClient, OracleCore, OracleError, OracleServer,
                            OracleUnavailable, client_decode, client_mutate, connect)

SPEC = SCALED_579

# (request, reply) byte traces
GOLDEN = [
    (bytes.fromhex("01" "0000000000000000"), bytes.fromhex("81" "0000000000000000")),
    (bytes.fromhex("07" "0000000000000000"), bytes.fromhex("ff" "0100000000000000")),
    (bytes.fromhex("02" "e703000000000000"), bytes.fromhex("ff" "0200000000000000")),
    (bytes.fromhex("01" "0000000000000001"), bytes.fromhex("ff" "0300000000000000")),
]


def pools():
    a = attack_keys(sco(0x1F00F, SPEC), SPEC)
    single = KeyPool(0x155, np.array([0x7777]), SPEC.spec_id)
    return [a, single, a]


@pytest.fixture(scope="module")
def core():
    return OracleCore(SPEC, pools(), seed=1)


def test_frame_layout():
    assert Frame(DECODE, 0x0102030405060708).encode() == bytes.fromhex("010807060504030201")
    assert Frame.decode(bytes.fromhex("810500000000000000")) == Frame(0x81, 5)
    with pytest.raises(ValueError):
        Frame.decode(b"\x01\x00")


@pytest.mark.parametrize("req,rep", GOLDEN)
def test_core_golden(core, req, rep):
    assert core.handle(req) == rep


def test_decode_matches_cipher(core):
    rng = random.Random(0)
    client = OracleClient(LoopbackChannel(core))
    for _ in range(100):
        k = rng.getrandbits(21)
        assert client_decode(client.channel, k) == sco(k, SPEC)
    assert client.decode(0) == 0


def test_mutate(core):
    client = OracleClient(LoopbackChannel(core))
    assert client.mutate(1) == 0x7777
    keys = {client_mutate(client.channel, 0) for _ in range(100)}
    assert len(keys) >= 2
    assert {sco(k, SPEC) for k in keys} == {sco(0x1F00F, SPEC)}
    with pytest.raises(OracleError) as err:
        client.mutate(999)
    assert err.value.reason == ERR_POOL_RANGE


def test_error_reasons(core):
    client = OracleClient(LoopbackChannel(core))
    with pytest.raises(OracleError) as err:
        client.decode(1 << 40)
    assert err.value.reason == ERR_BAD_KEY
    client.channel.write(b"\x33" + bytes(8))
    assert client.channel.read_exact(9)[:2] == bytes([0xFF, ERR_UNKNOWN_OPCODE])


def test_loopback_closed(core):
    client = connect("loopback", core=core)
    client.close()
    with pytest.raises(OracleUnavailable):
        client.decode(1)


def _raw_socket_exchange(addr, frames):
    fam = socket.AF_INET if addr.isdigit() else socket.AF_UNIX
    where = ("127.0.0.1", int(addr)) if addr.isdigit() else addr
    with socket.socket(fam, socket.SOCK_STREAM) as s:
        s.settimeout(5)
        s.connect(where)
        out = []
        for req in frames:
            s.sendall(req)
            buf = b""
            while len(buf) < 9:
                buf += s.recv(9 - len(buf))
            out.append(buf)
        return out


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return str(s.getsockname()[1])


@pytest.mark.parametrize("kind", ["unix", "tcp"])
def test_socket_golden(core, tmp_path, kind):
    addr = str(tmp_path / "o.sock") if kind == "unix" else _free_port()
    with OracleServer(core, "socket", addr):
        got = _raw_socket_exchange(addr, [r for r, _ in GOLDEN])
        assert got == [rep for _, rep in GOLDEN]
        with connect("socket", addr) as client:
            assert client.decode(12345) == sco(12345, SPEC)


def test_pipe_golden(core, tmp_path):
    addr = str(tmp_path / "o")
    with OracleServer(core, "pipe", addr):
        fd = os.open(addr + ".req", os.O_WRONLY)
        with os.fdopen(fd, "wb", buffering=0) as w, open(addr + ".resp", "rb", buffering=0) as r:
            for req, rep in GOLDEN:
                w.write(req)
                assert r.read(9) == rep
        with connect("pipe", addr) as client:
            assert client.decode(99) == sco(99, SPEC)


def test_unavailable(tmp_path):
    with pytest.raises(OracleUnavailable):
        connect("socket", str(tmp_path / "none.sock"))
    with pytest.raises(OracleUnavailable):
        connect("pipe", str(tmp_path / "none"))
    with pytest.raises(ValueError):
        connect("carrier-pigeon", "x")


def test_server_stopped(core, tmp_path):
    addr = str(tmp_path / "s.sock")
    server = OracleServer(core, "socket", addr).start()
    with connect("socket", addr) as client:
        assert client.decode(0) == 0
    server.stop()
    with pytest.raises(OracleUnavailable):
        connect("socket", addr).decode(1)


def test_peer_closed_mid_session(core):
    a, b = socket.socketpair()
    client = OracleClient(SocketChannel(a))
    b.close()
    with pytest.raises(OracleUnavailable):
        client.decode(1)
