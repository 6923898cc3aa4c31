"""Smoke test for the cpi_py extension module.

Build and install the module first, e.g. `maturin develop -m crates/py/Cargo.toml`,
or copy the cdylib built with `--features extension-module` next to this
script as `cpi_py.so`.
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import cpi_py  # noqa: E402


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)
    print(f"ok   {msg}")


def main():
    cfg = cpi_py.Scenario.paper_setup()
    check(abs(cfg.focused_resolution() - 14e-6) < 1e-12, "focused resolution is 14 um")
    check(cfg.hash() == cpi_py.Scenario().hash(), "default constructor is the reference setup")
    check(cpi_py.Scenario(z_b=0.1).z_b == 0.1, "keyword override")
    check(cpi_py.Scenario.from_toml(cfg.to_toml()).hash() == cfg.hash(), "TOML round trip")
    check(0.9999 < cfg.optimal_alpha() < 1.0, "optimal alpha just below 1")

    mask = cpi_py.Mask("slits:n=3,a=99e-6,d=198e-6")
    check(mask.n_slits() == 3, "mask spec parsed")
    t = mask.transmission([-198e-6, -100e-6, 0.0, 198e-6])
    check(t == [1.0, 0.0, 1.0, 1.0], "mask transmission")

    tensor = cpi_py.gamma_map(cfg, mask)
    na, nb = tensor.shape
    check(na > 0 and nb > 0, f"analytic tensor {na} x {nb}")
    ghost = tensor.ghost()
    refocused = tensor.refocus()
    v_ghost, v_ref = ghost.visibility(mask), refocused.visibility(mask)
    check(v_ghost < 0.1 < v_ref, f"refocusing restores contrast ({v_ghost:.3f} -> {v_ref:.3f})")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "gamma.cpig")
        tensor.save(path)
        back = cpi_py.Tensor.load(path)
        check(back.values() == tensor.values(), "tensor file round trip")
        with open(path, "r+b") as f:
            f.seek(200)
            byte = f.read(1)
            f.seek(200)
            f.write(bytes([byte[0] ^ 1]))
        try:
            cpi_py.Tensor.load(path)
            check(False, "corruption detected")
        except OSError as e:
            check("checksum" in str(e), "corruption detected")

    focus = cfg.with_z_b(cfg.z_a)
    point = cpi_py.gamma_map(focus, cpi_py.Mask.slits(1, 1e-6, 1e-6), (241, 0.25e-6), (160, 50e-6))
    w = point.ghost().fwhm()
    check(10e-6 < w < 16e-6, f"focused ghost of a 1 um slit has FWHM {w * 1e6:.2f} um")
    std = cpi_py.image("standard", focus, cpi_py.Mask.double_slit(56e-6), focus.z_b)
    check(std.visibility(cpi_py.Mask.double_slit(56e-6)) > 0.9, "well-separated slits resolved at focus")

    stack = cpi_py.generate_frames(focus, cpi_py.Mask.slits(2, 28e-6, 56e-6), 200, seed=1, pixels_a=32, pixels_b=16)
    check(stack.n_frames == 200, "Monte-Carlo frames")
    g2 = sum(stack.g2_a()) / len(stack.g2_a())
    check(1.6 < g2 < 2.4, f"chaotic statistics g2 = {g2:.3f}")
    est = stack.estimate()
    check(est.shape == (32, 16), "estimated tensor shape")

    b = cpi_py.geometric_bound(cfg, 5 * cfg.focused_resolution())
    check(b["near"] < cfg.z_a < b["far"], "geometric bound brackets the focus")

    try:
        cpi_py.Mask("slits:n=2,a=3e-5,d=1e-5")
        check(False, "overlap rejected")
    except ValueError:
        check(True, "overlap rejected")

    print(f"cpi_py {cpi_py.__version__}: all smoke checks passed")


if __name__ == "__main__":
    main()
