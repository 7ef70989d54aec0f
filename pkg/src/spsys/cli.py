"""``spsys`` command-line tool.

Results go to stdout, diagnostics to stderr. Exit codes: 0 success,
1 validation errors, 2 parse failure, 3 usage error, 4 strict-mode failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .advisor import (
    EditPreconditionFailed,
    EditScriptError,
    ResultInvalid,
    advise,
    apply_what_if,
    parse_edit_script,
)
from .composer import NoParts, UnsatisfiedPart, enumerate_setups, scaffold
from .metrics import compute_all
from .model import NotFound, SpsysError
from .parser import parse
from .serializer import serialize
from .tracer import NotStructural, trace
from .validator import validate

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_USAGE, EXIT_STRICT = 0, 1, 2, 3, 4
SCHEMA_VERSION = 1
REQUIREMENT_RULES = {"E006", "E007", "E011", "E012", "E013"}


class UsageError(Exception):
    pass


class _ArgParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS)
    common.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                        help="fail on warnings and undefined factors")
    common.add_argument("--no-color", action="store_true", default=argparse.SUPPRESS)

    parser = _ArgParser(prog="spsys", description="Validate and evaluate .spsys architecture models.",
                        parents=[common])
    parser.add_argument("--version", action="version", version=f"spsys {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgParser)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("file", help=".spsys model file")
        return p

    command("check", "parse and validate")
    command("eval", "compute integrity factors and improvement findings")
    p = command("setups", "enumerate deployment setups")
    p.add_argument("--functional", action="store_true", help="also report the functional configuration count")
    p = command("trace", "trace an agent or subsystem back to its requirements")
    p.add_argument("--element", required=True)
    p = command("scaffold", "generate structure from the requirements")
    p.add_argument("-o", "--output", help="write the generated .spsys here (default: stdout)")
    p = command("whatif", "apply an edit script and report factor deltas")
    p.add_argument("--edits", required=True, help="edit script file")
    p = command("report", "everything: check, factors, findings, setups")
    p.add_argument("-o", "--output", help="directory for report.json and report.txt")
    return parser


@dataclass
class Outcome:
    code: int = EXIT_OK
    sections: dict = field(default_factory=dict)
    text: list[str] = field(default_factory=list)


class Runner:
    def __init__(self, args: argparse.Namespace, out, err) -> None:
        self.args = args
        self.out = out
        self.err = err
        self.json = getattr(args, "format", "text") == "json"
        self.strict = getattr(args, "strict", False)
        no_color = getattr(args, "no_color", False) or os.environ.get("SPSYS_NO_COLOR") == "1"
        self.color = not no_color and hasattr(err, "isatty") and err.isatty()
        self.envelope: dict = {
            "schemaVersion": SCHEMA_VERSION,
            "tool": "spsys",
            "toolVersion": __version__,
            "command": args.command,
            "modelName": None,
            "inputDigest": None,
            "status": "ok",
            "diagnostics": [],
        }
        self.warnings = 0

    # -- output helpers -----------------------------------------------------

    def diag(self, line: str, severity: str) -> None:
        if self.color:
            colour = "31" if severity == "error" else "33"
            line = f"\x1b[{colour}m{severity}\x1b[0m{line[len(severity):]}"
        print(line, file=self.err)

    def emit_diagnostics(self, diags) -> None:
        for d in diags:
            self.envelope["diagnostics"].append(d.to_json())
            self.diag(d.render(), d.severity)
            if d.severity == "warning":
                self.warnings += 1

    def finish(self, outcome: Outcome) -> int:
        code = outcome.code
        if code == EXIT_OK and self.strict:
            undefined = outcome.sections.get("_undefined", [])
            if self.warnings or undefined:
                code = EXIT_STRICT
                for name in undefined:
                    print(f"strict: factor {name} is undefined", file=self.err)
                if self.warnings:
                    print(f"strict: {self.warnings} warning(s) promoted to failure", file=self.err)
        outcome.sections.pop("_undefined", None)
        self.envelope["status"] = {EXIT_OK: "ok", EXIT_INVALID: "invalid", EXIT_PARSE: "parse-error",
                                   EXIT_STRICT: "strict-failure"}.get(code, "error")
        if self.json:
            self.envelope.update(outcome.sections)
            self.out.write(json.dumps(self.envelope, indent=2) + "\n")
        elif outcome.text:
            self.out.write("\n".join(outcome.text) + "\n")
        return code

    # -- pipeline -------------------------------------------------------------

    def load(self):
        path = Path(self.args.file)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        self.envelope["inputDigest"] = hashlib.sha256(data).hexdigest()
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            raise UsageError(f"{path} is not valid UTF-8") from None
        result = parse(text, str(path))
        self.emit_diagnostics(result.diagnostics)
        if result.model is not None:
            self.envelope["modelName"] = result.model.name
        return result.model

    def checked(self, require_valid: bool = True):
        """Parse and validate; returns (model, validated, early-exit outcome)."""
        model = self.load()
        if model is None:
            return None, None, Outcome(EXIT_PARSE, text=[f"parse failed: {self.args.file}"])
        result = validate(model)
        self.emit_diagnostics(result.diagnostics)
        if require_valid and not result.ok:
            errors = sum(d.is_error for d in result.diagnostics)
            return model, None, Outcome(EXIT_INVALID, text=[f"invalid: {model.name} ({errors} error(s))"])
        return model, result.validated, None

    def check(self) -> Outcome:
        model, validated, early = self.checked()
        if early:
            return early
        return Outcome(text=[f"ok: {model.name} ({self.warnings} warning(s))"])

    def eval_sections(self, validated) -> tuple[dict, list[str]]:
        factors = compute_all(validated)
        findings = advise(validated)
        text = [factors.render()]
        if findings:
            text += ["findings:"] + [f"  {f.render()}" for f in findings]
        sections = {"factors": factors.to_json(), "findings": [f.to_json() for f in findings],
                    "_undefined": factors.undefined()}
        return sections, text

    def eval(self) -> Outcome:
        _, validated, early = self.checked()
        if early:
            return early
        sections, text = self.eval_sections(validated)
        return Outcome(sections=sections, text=text)

    def setups_sections(self, validated, functional: bool) -> tuple[dict, list[str]]:
        try:
            plan = enumerate_setups(validated)
        except NoParts as exc:
            return {"setups": {"count": 0, "functionalConfigurations": None, "setups": []}}, [f"no setups: {exc}"]
        return {"setups": plan.to_json()}, [plan.render(functional)]

    def setups(self) -> Outcome:
        _, validated, early = self.checked()
        if early:
            return early
        sections, text = self.setups_sections(validated, self.args.functional)
        return Outcome(sections=sections, text=text)

    def trace(self) -> Outcome:
        _, validated, early = self.checked()
        if early:
            return early
        try:
            result = trace(validated, self.args.element)
        except (NotFound, NotStructural) as exc:
            raise UsageError(str(exc)) from None
        return Outcome(sections={"trace": result.to_json()}, text=[result.render()] if result.chains else [])

    def scaffold(self) -> Outcome:
        model, _, early = self.checked(require_valid=False)
        if early:
            return early
        blocking = [d for d in self.envelope["diagnostics"]
                    if d["severity"] == "error" and d["code"] in REQUIREMENT_RULES]
        if blocking:
            return Outcome(EXIT_INVALID, text=["requirements are invalid; nothing generated"])
        try:
            result = scaffold(model)
        except UnsatisfiedPart as exc:
            print(f"error: {exc}", file=self.err)
            return Outcome(EXIT_INVALID)
        check = validate(result.model)
        if not check.ok:
            self.emit_diagnostics(check.diagnostics)
            return Outcome(EXIT_INVALID)
        source = serialize(result.model)
        section = {"provenance": result.provenance, "output": self.args.output}
        if self.args.output:
            Path(self.args.output).write_text(source, encoding="utf-8", newline="\n")
            text = [f"wrote {self.args.output}"]
        else:
            section["source"] = source
            text = [source.rstrip("\n")]
        return Outcome(sections={"scaffold": section}, text=text)

    def whatif(self) -> Outcome:
        _, validated, early = self.checked()
        if early:
            return early
        try:
            script = parse_edit_script(Path(self.args.edits).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read {self.args.edits}: {exc.strerror}") from None
        except EditScriptError as exc:
            raise UsageError(f"{self.args.edits}: {exc}") from None
        try:
            report, _ = apply_what_if(validated, script)
        except EditPreconditionFailed as exc:
            print(f"error: {exc}", file=self.err)
            return Outcome(EXIT_INVALID)
        except ResultInvalid as exc:
            print(f"error: {exc}", file=self.err)
            self.emit_diagnostics([d for d in exc.diagnostics if d.is_error])
            return Outcome(EXIT_INVALID)
        return Outcome(sections={"whatif": report.to_json(), "_undefined": report.after.undefined()},
                       text=[report.render()])

    def report(self) -> Outcome:
        model, validated, early = self.checked()
        if early:
            return early
        eval_sections, eval_text = self.eval_sections(validated)
        setup_sections, setup_text = self.setups_sections(validated, True)
        sections = {**eval_sections, **setup_sections}
        diag_lines = [self._diag_text(d) for d in self.envelope["diagnostics"]] or ["(none)"]
        text = [f"model: {model.name}", f"digest: {self.envelope['inputDigest']}",
                "", "== diagnostics ==", *diag_lines,
                "", "== factors ==", *eval_text,
                "", "== setups ==", *setup_text]
        if self.args.output:
            outdir = Path(self.args.output)
            outdir.mkdir(parents=True, exist_ok=True)
            envelope = {**self.envelope, **{k: v for k, v in sections.items() if not k.startswith("_")}}
            (outdir / "report.json").write_text(json.dumps(envelope, indent=2) + "\n", encoding="utf-8")
            (outdir / "report.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
        return Outcome(sections=sections, text=text)

    @staticmethod
    def _diag_text(d: dict) -> str:
        if "subject" in d:
            return f"{d['severity']} {d['code']} [{d['subject']}] {d['message']}"
        s = d["span"]
        return f"{d['severity']} {d['code']} {s['file']}:{s['startLine']}:{s['startCol']} {d['message']}"


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    runner = Runner(args, out, err)
    try:
        outcome = getattr(runner, args.command)()
    except UsageError as exc:
        print(f"spsys: error: {exc}", file=err)
        return EXIT_USAGE
    except SpsysError as exc:
        print(f"spsys: error: {exc}", file=err)
        return EXIT_INVALID
    return runner.finish(outcome)


if __name__ == "__main__":
    sys.exit(main())
