"""Cache-oblivious mesh layouts with a two-level memory simulator.

Build balanced decomposition trees of well-shaped meshes with geometric
sphere separators, lay the vertices out by leaf order, and measure the
resulting mesh-update transfer counts under an LRU block cache.
"""

from .balanced import (
    FBPartition,
    RedBlueArray,
    Window,
    build_fb_tree,
    build_red_blue_array,
    crossing_bound,
    fully_balanced_partition,
    kway_partition,
    necklace_bisect,
    outer_edge_counts,
    verify_fb_tree,
)
from .damsim import (
    DamConfig,
    MemoryImage,
    SimResult,
    image_to_mesh,
    mesh_update,
    serialize_layout,
    simulate_update,
    sweep,
    sweep_csv,
)
from .decomp import (
    ROOT,
    BitId,
    DecompTree,
    EdgeClass,
    TreeAudit,
    build_decomposition_tree,
    classify_edge,
    subtree_range,
    verify_tree,
)
from .layout import (
    LayoutPermutation,
    StatsReport,
    cache_oblivious_layout,
    layout_stats,
    leaf_order,
    random_permutation_layout,
    relabel_mesh,
)
from .mesh import (
    Mesh,
    MeshError,
    SimplexQuality,
    ValidationReport,
    VertexRec,
    gen_grid2d,
    gen_grid3d,
    meshes_equal,
    validate_mesh,
)
from .relax import (
    RBPartition,
    RelaxContext,
    RelaxTree,
    build_rb_tree,
    build_rb_tree_with_report,
    build_relax_partition_tree,
    relax_balanced_partition,
    verify_rb_tree,
)
from .separator import (
    ConformalMap,
    RetriesExhausted,
    SeparatorConfig,
    SeparatorCut,
    SeparatorResult,
    approx_centerpoint,
    conformal_map,
    find_separator,
    great_circle_to_cut,
    stereo_project,
)

__version__ = "0.1.0"
