"""Smoke test for the slacktune extension module.

Build and install first:  maturin develop -m crates/py/Cargo.toml --release
"""

import slacktune


def main():
    h = slacktune.Hamiltonian.tfim(2, 1.0, 0.0)
    assert h.terms() == [(-1.0, "ZZ")]
    assert abs(h.ground_energy() + 1.0) < 1e-12

    bell = slacktune.Circuit.from_qasm(
        'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[2];\ncreg c[2];\n'
        "h q[0];\ncx q[0],q[1];\nmeasure q -> c;\n"
    )
    ideal = slacktune.NoiseModel.ideal()
    assert abs(h.energy(bell, [], ideal) + 1.0) < 1e-12
    dist = bell.distribution([], ideal)
    assert abs(dist["00"] - 0.5) < 1e-12 and abs(dist["11"] - 0.5) < 1e-12

    ansatz = slacktune.Circuit.su2(4, 2, "circular")
    assert len(ansatz.parameters) == 24
    windows = ansatz.idle_windows(2)
    assert windows, "the ring ansatz leaves idle slack"
    padded = ansatz.with_dd("xy4", 1)
    assert len(padded.gates()) > len(ansatz.gates())
    assert "delay[" in padded.to_qasm()

    noisy = slacktune.NoiseModel()
    zeros = [0.0] * 24
    e_ideal = slacktune.Hamiltonian.tfim(4).energy(ansatz, zeros, ideal)
    e_noisy = slacktune.Hamiltonian.tfim(4).energy(ansatz, zeros, noisy, realizations=8)
    assert abs(e_ideal + 3.0) < 1e-12 and e_noisy > e_ideal

    echo = slacktune.spin_echo_sweep(noisy, positions=5, realizations=16)
    best = max(range(len(echo)), key=lambda i: echo[i][1])
    assert 0 < best < len(echo) - 1

    try:
        slacktune.Circuit.from_qasm("qreg q[1];\nfoo q[0];\n")
    except ValueError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("unknown gate accepted")

    print("smoke test ok:", len(windows), "windows,", f"E_noisy = {e_noisy:.4f}")


if __name__ == "__main__":
    main()
