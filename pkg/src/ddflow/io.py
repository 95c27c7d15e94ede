"""File exports: legacy VTK, CSV tables, control round-trip and plain-text reports."""
import csv
import os

import numpy as np

VTK_QUADRATIC_TRIANGLE = 22


def fmt(v):
    """Deterministic, round-trippable float formatting."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_control(path, values):
    """Cellwise control as CSV (cell, U1, U2) with full float precision."""
    values = np.asarray(values, dtype=float)
    write_csv(path, ["cell", "U1", "U2"], [(i, v[0], v[1]) for i, v in enumerate(values)])


def read_control(path):
    header, rows = read_csv(path)
    if header != ["cell", "U1", "U2"]:
        raise ValueError(f"{path}: not a control file (header {header})")
    out = np.array([[float(r[1]), float(r[2])] for r in rows])
    cells = [int(r[0]) for r in rows]
    if cells != list(range(len(rows))):
        raise ValueError(f"{path}: cells must be listed in order 0..{len(rows) - 1}")
    return out.reshape(-1, 2)


def write_vtk(path, disc, point_vectors=None, point_scalars=None, cell_data=None,
              title="ddflow fields"):
    """Legacy ASCII VTK on quadratic triangles.

    ``point_vectors`` maps names to P2 two-component vectors, ``point_scalars``
    to P2 scalars or P1 scalars (extended to edge midpoints by averaging);
    ``cell_data`` to arrays of shape (n_cells,) or (n_cells, 2).
    """
    mesh = disc.mesh
    pts = disc.P2.dof_coordinates
    npts = pts.shape[0]
    cells = disc.P2.cell_dofs
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {npts} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0.0" for x, y in pts]
    lines.append(f"CELLS {cells.shape[0]} {cells.shape[0] * 7}")
    lines += ["6 " + " ".join(str(int(i)) for i in c) for c in cells]
    lines.append(f"CELL_TYPES {cells.shape[0]}")
    lines += [str(VTK_QUADRATIC_TRIANGLE)] * cells.shape[0]
    nv = mesh.num_vertices
    if point_vectors or point_scalars:
        lines.append(f"POINT_DATA {npts}")
        for name, vec in (point_vectors or {}).items():
            n = npts
            lines.append(f"VECTORS {name} double")
            lines += [f"{fmt(a)} {fmt(b)} 0.0" for a, b in zip(vec[:n], vec[n:2 * n])]
        for name, s in (point_scalars or {}).items():
            s = np.asarray(s, dtype=float)
            if s.shape[0] == nv:   # P1 field: midpoint values by averaging
                s = np.concatenate([s, s[mesh.edges].mean(axis=1)])
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [fmt(v) for v in s]
    if cell_data:
        lines.append(f"CELL_DATA {cells.shape[0]}")
        for name, arr in cell_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{fmt(a)} {fmt(b)} 0.0" for a, b in arr]
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [fmt(v) for v in arr]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_state_vtk(path, disc, state, control=None):
    cell = {"control": control} if control is not None else None
    write_vtk(path, disc, {"u": state.u}, {"p": state.p, "T": state.T, "S": state.S}, cell)


def write_adjoint_vtk(path, disc, adjoint, mask=None):
    n = disc.n2
    cell = {"active_1": mask[:, 0], "active_2": mask[:, 1]} if mask is not None else None
    write_vtk(path, disc, {"phi": adjoint.phi},
              {"xi": adjoint.xi, "eta_T": adjoint.eta[:n], "eta_S": adjoint.eta[n:]}, cell,
              title="ddflow adjoint fields")


def write_report(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
