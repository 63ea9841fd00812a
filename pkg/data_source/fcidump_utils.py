import logging
import os
import re
from typing import Annotated, Optional

import numpy as np

from exceptions import IndexRangeError, ParseError
from functional.hamiltonian import ActiveSpaceIntegrals

logger = logging.getLogger(__name__)

_NAMELIST_ITEM = re.compile(r"([A-Za-z][A-Za-z0-9_]*)\s*=\s*([^=]*?)\s*(?=,?\s*[A-Za-z][A-Za-z0-9_]*\s*=|$)")

GeometryTagType = Annotated[Optional[tuple[float, float]], "(r bohr, theta radian) of the grid point"]


def _namelist_values(raw: str) -> list[int]:
    return [int(v) for v in raw.replace(",", " ").split()]


class FCIDumpUtils:

    def parse_fcidump(
        text: Annotated[str | bytes, "Contents of an FCIDUMP file"],
        geometry_tag: GeometryTagType = None,
    ) -> ActiveSpaceIntegrals:
        """
        Parse an FCIDUMP file (Molpro namelist header, chemists' notation integrals).
        Omitted records are zero and indices become 0-based.
        """
        if isinstance(text, bytes):
            text = text.decode()
        lines = text.splitlines()

        # header: "&FCI ..." through "&END" or "/"
        first = next((i for i, line in enumerate(lines) if line.strip()), None)
        if first is None or not lines[first].strip().upper().startswith("&FCI"):
            raise ParseError("missing &FCI namelist header", 1 if first is None else first + 1)
        header_parts = []
        end = None
        for i in range(first, len(lines)):
            stripped = lines[i].strip()
            upper = stripped.upper()
            if upper.startswith("&END") or upper == "/":
                end = i
                break
            if upper.endswith("&END") or upper.endswith("/"):
                header_parts.append(re.sub(r"(&END|/)\s*$", "", stripped, flags=re.IGNORECASE))
                end = i
                break
            header_parts.append(stripped)
        if end is None:
            raise ParseError("namelist header is not terminated by &END or /", first + 1)
        header_text = re.sub(r"^&FCI", "", " ".join(header_parts), flags=re.IGNORECASE)
        fields = {key.upper(): raw for key, raw in _NAMELIST_ITEM.findall(header_text)}
        try:
            n_orbitals = _namelist_values(fields["NORB"])[0]
            n_electrons = _namelist_values(fields["NELEC"])[0]
            ms2 = _namelist_values(fields["MS2"])[0] if "MS2" in fields else 0
        except (KeyError, IndexError, ValueError) as e:
            raise ParseError(f"header lacks a valid NORB/NELEC entry ({e})", first + 1) from e
        if n_orbitals <= 0 or n_electrons < 0:
            raise ParseError(f"NORB={n_orbitals}, NELEC={n_electrons} out of range", first + 1)

        n = n_orbitals
        h1 = np.zeros((n, n))
        h2 = np.zeros((n, n, n, n))
        core_energy = 0.0
        for line_number, line in enumerate(lines[end + 1:], start=end + 2):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 5:
                raise ParseError(f"expected value and 4 indices, got {len(tokens)} fields", line_number)
            try:
                value = float(tokens[0].replace("D", "E").replace("d", "e"))
                i, j, k, l = (int(t) for t in tokens[1:])
            except ValueError as e:
                raise ParseError(f"malformed record {line.strip()!r}", line_number) from e
            if any(idx < 0 or idx > n for idx in (i, j, k, l)):
                raise IndexRangeError(f"line {line_number}: index outside [1, {n}] in {line.strip()!r}")
            if i and j and k and l:
                p, q, r, s = i - 1, j - 1, k - 1, l - 1
                for a, b, c, d in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r)):
                    h2[a, b, c, d] = value
                    h2[c, d, a, b] = value
            elif i and j and not k and not l:
                h1[i - 1, j - 1] = value
                h1[j - 1, i - 1] = value
            elif not (i or j or k or l):
                core_energy = value
            elif i and not (j or k or l):
                # orbital energies carry no Hamiltonian information
                continue
            else:
                raise ParseError(f"unrecognised index pattern {tokens[1:]}", line_number)
        logger.debug("parsed FCIDUMP: NORB=%d NELEC=%d core=%.10f", n, n_electrons, core_energy)
        return ActiveSpaceIntegrals(
            n_orbitals=n,
            n_electrons=n_electrons,
            core_energy=core_energy,
            h1=h1,
            h2=h2,
            geometry_tag=geometry_tag,
            ms2=ms2,
        )

    def read_fcidump(
        path: Annotated[str | os.PathLike, "Path of the FCIDUMP file"],
        geometry_tag: GeometryTagType = None,
    ) -> ActiveSpaceIntegrals:
        with open(path, "rb") as f:
            return FCIDumpUtils.parse_fcidump(f.read(), geometry_tag)

    def format_fcidump(
        ints: Annotated[ActiveSpaceIntegrals, "Integrals to serialise"],
        tol: Annotated[float, "Integrals below this magnitude are omitted"] = 1e-15,
    ) -> str:
        n = ints.n_orbitals
        out = [
            f" &FCI NORB={n:4d},NELEC={ints.n_electrons:2d},MS2={ints.ms2},",
            "  ORBSYM=" + "1," * n,
            "  ISYM=1,",
            " &END",
        ]
        record = "{:23.16e} {:4d} {:4d} {:4d} {:4d}"
        for p in range(n):
            for q in range(p + 1):
                pq = p * (p + 1) // 2 + q
                for r in range(n):
                    for s in range(r + 1):
                        if r * (r + 1) // 2 + s > pq:
                            continue
                        value = ints.h2[p, q, r, s]
                        if abs(value) > tol:
                            out.append(record.format(value, p + 1, q + 1, r + 1, s + 1))
        for p in range(n):
            for q in range(p + 1):
                if abs(ints.h1[p, q]) > tol:
                    out.append(record.format(ints.h1[p, q], p + 1, q + 1, 0, 0))
        out.append(record.format(ints.core_energy, 0, 0, 0, 0))
        return "\n".join(out) + "\n"

    def write_fcidump(
        ints: Annotated[ActiveSpaceIntegrals, "Integrals to serialise"],
        save_path: Annotated[str | os.PathLike, "Destination file"],
    ) -> None:
        with open(save_path, "w") as f:
            f.write(FCIDumpUtils.format_fcidump(ints))
