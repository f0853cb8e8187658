"""Stage 3: every class's valid variants must cover its interface's declared signatures."""

from __future__ import annotations

from dataclasses import dataclass, field

from .frontend import Diagnostic
from .inference import BOTH, VariantId
from .oolong import ClassTable
from .solver import Solution
from .syntax import InterfaceMethod, MethodSig, Qualifier


@dataclass(frozen=True)
class SigTriple:
    param: Qualifier
    ret: Qualifier
    method: str
    param_type: str
    ret_type: str
    # the parameter name is carried for display only
    param_name: str = field(default="x", compare=False)

    def describe(self) -> str:
        return f"{self.method} : ({self.param} -> {self.ret})"


def _triple(q1: Qualifier, q2: Qualifier, sig: MethodSig) -> SigTriple:
    return SigTriple(q1, q2, sig.name, sig.param_type, sig.ret_type, sig.param)


def interface_msig(im: InterfaceMethod) -> list[SigTriple]:
    return [_triple(q1, q2, im.sig) for q1, q2 in (im.annotations or ())]


def variant_msigs(sol: Solution, nu: Qualifier, cls: str, sig: MethodSig) -> list[SigTriple]:
    return [
        _triple(n1, n2, sig)
        for n1 in BOTH
        for n2 in BOTH
        if sol.valid(VariantId(nu, cls, sig.name, n1, n2))
    ]


def missing_triples(sol: Solution, ct: ClassTable, cls: str) -> list[tuple[Qualifier, SigTriple]]:
    iface = ct.classes[cls].implements
    required = [t for im in ct.msigs_of(iface).values() for t in interface_msig(im)]
    out = []
    for nu in BOTH:
        provided = set()
        for im in ct.msigs_of(cls).values():
            provided.update(variant_msigs(sol, nu, cls, im.sig))
        out.extend((nu, t) for t in required if t not in provided)
    return out


def interface_impl(sol: Solution, ct: ClassTable) -> tuple[bool, list[Diagnostic]]:
    diags = []
    for cls, decl in ct.classes.items():
        for nu, t in missing_triples(sol, ct, cls):
            diags.append(
                Diagnostic("E-IFACE", f"class {cls} misses variant (recv={nu.short}) {t.describe()}", decl.span)
            )
    return not diags, diags
