"""CLI driver: exit codes, output shapes, determinism."""

import pathlib

import pytest

from minihal.cli import main

from helpers import PROGRAMS


def run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr()
    return status, out.out, out.err


def path(name: str) -> str:
    return str(PROGRAMS / name)


class TestCheck:
    def test_clean_program_is_status_zero(self, capsys):
        status, out, err = run(capsys, "check", path("stack.hal"))
        assert status == 0
        assert "push_mode1(S0, E, S1) :- S1 := [E|S0]." in out
        assert err == ""

    def test_stack_procedure_inventory(self, capsys):
        _, out, _ = run(capsys, "check", path("stack.hal"))
        names = [line.split("(")[0] for line in out.splitlines()
                 if line and ":-" in line]
        assert names == ["push_mode1", "pop_mode1", "pop_mode2",
                         "empty_mode1", "empty_mode2"]

    def test_mode_error_is_status_one(self, capsys):
        status, _, err = run(capsys, "check", path("noncheck.hal"))
        assert status == 1
        assert "E001" in err and "r(L1)" in err

    def test_success_too_weak_is_status_one(self, capsys):
        status, _, err = run(capsys, "check", path("lcint.hal"))
        assert status == 1
        assert "E002" in err and "L" in err

    def test_warnings_keep_status_zero(self, capsys):
        status, out, err = run(capsys, "check", path("append_oo.hal"))
        assert status == 0
        assert err.count("W001") == 1
        assert "append_mode1" in out

    def test_werror_promotes_warnings(self, capsys):
        status, _, _ = run(capsys, "check", "--werror", path("append_oo.hal"))
        assert status == 1

    def test_no_init_breaks_pairlist(self, capsys):
        status, _, err = run(capsys, "check", "--no-init",
                             path("pairlist.hal"))
        assert status == 1
        assert "E001" in err

    def test_pairlist_checks_with_init(self, capsys):
        status, _, _ = run(capsys, "check", path("pairlist.hal"))
        assert status == 0

    def test_parse_error_is_status_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.hal"
        bad.write_text(":- typedef t -> .\n")
        status, _, err = run(capsys, "check", str(bad))
        assert status == 2
        assert "E101" in err

    def test_type_error_is_status_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.hal"
        bad.write_text(
            ":- typedef t -> a.\n:- typedef u -> b.\n"
            ":- pred p(t, u).\n:- mode p(in, in) is semidet.\n"
            "p(X, Y) :- X = Y.\n")
        status, _, err = run(capsys, "check", str(bad))
        assert status == 2
        assert "E102" in err

    def test_missing_file_is_status_two(self, capsys):
        status, _, err = run(capsys, "check", "/nonexistent/x.hal")
        assert status == 2

    def test_output_is_byte_identical_across_runs(self, capsys):
        s1, out1, err1 = run(capsys, "check", path("hopush.hal"))
        s2, out2, err2 = run(capsys, "check", path("hopush.hal"))
        assert (s1, out1, err1) == (s2, out2, err2)


class TestDumpTi:
    def test_dump_matches_construction(self, capsys):
        status, out, _ = run(capsys, "dump-ti", path("stack.hal"),
                             "--type", "list(T)",
                             "--inst", "nelist(ground)")
        assert status == 0
        lines = out.strip().splitlines()
        assert lines[0] == ("ti(list(T),nelist(ground)) -> "
                            "[ti(T,ground)|ti(list(T),list(ground))]")
        assert "ti(T,ground) -> $ground(T)$" in lines

    def test_dump_expands_mode_macros_in_insts(self, capsys):
        status, out, _ = run(capsys, "dump-ti", path("hopush.hal"),
                             "--type", "pred(sign, sign)",
                             "--inst", "pred(in, out)")
        assert status == 0
        assert "$ipred$" in out

    def test_dump_unknown_type_is_status_two(self, capsys):
        status, _, err = run(capsys, "dump-ti", path("stack.hal"),
                             "--type", "wat", "--inst", "ground")
        assert status == 2


class TestOracleCommand:
    def test_small_run(self, capsys):
        status, out, _ = run(capsys, "oracle", "--samples", "40",
                             "--depth", "3", "--seed", "11")
        assert status == 0
        assert "40 samples" in out and "0 failures" in out
