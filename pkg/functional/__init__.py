from .hamiltonian import ActiveSpaceIntegrals, FermionOperator, PauliSum, build_fermionic_hamiltonian, jordan_wigner
from .qsim import AnsatzCircuit, Statevector, apply_ansatz, basis_state
from .ssvqe import optimize, scan_grid, ssvqe_objective
from .nac import cartesian_to_internal, compute_nac_field, fix_sign_continuity
from .surfaces import FineSurfaces, SurfaceSet, assemble, interpolate
from .dynamics import CoupledHamiltonian, Wavepacket, propagate
from .synthetic import ConicalModel
