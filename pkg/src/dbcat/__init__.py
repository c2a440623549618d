"""Finite relational instances, bounded power-views, and a category of
view-based database mappings with functorial model checking."""

from .core import (
    BOT,
    SENTINEL_A,
    SENTINEL_B,
    DbcatError,
    Instance,
    Relation,
    Sentinel,
    active_domain,
    bottom_instance,
    disjoint_union,
    federate,
    is_empty_isomorphic,
    make_instance,
)
from .queries import (
    BaseRel,
    Builtin,
    ColEq,
    Const,
    ConstEq,
    CrossComponentQuery,
    Join,
    Project,
    RelAtom,
    Rename,
    Rule,
    Select,
    Union,
    Var,
    eval_rule,
    eval_spjru,
    rule,
    rule_to_spjru,
)
from .constraints import Egd, Sentence, Tgd, check_egd, check_sentence, check_tgd
from .powerview import (
    ViewSet,
    instances_isomorphic,
    matching,
    merging,
    power_view,
)
from .category import (
    Flux,
    ModeViolation,
    Morphism,
    ViewMap,
    compose,
    coproduct_morphism,
    empty_morphism,
    equivalent,
    flux,
    identity,
    injection,
    make_atomic,
    mediating,
    pairing,
    projection,
    verify_duality,
)
from .schemas import (
    EMPTY_SCHEMA,
    MappingGraph,
    SAtom,
    Schema,
    SchemaMapping,
    Sketch,
    branch,
    build_sketch,
    fed,
    make_pair,
    mapping_graph,
    schema_identity,
    sep,
    seq_compose,
    term_layout,
)
from .interpret import (
    Interpretation,
    check_functor,
    check_gamma_iso,
    check_model,
    interpret_arrow,
    interpret_term,
    interpretation,
)
from .dsl import Workspace, parse_workspace, parse_workspace_text, serialize_workspace

__version__ = "0.1.0"
