"""Registry-style lung cohort mining pipeline.

Fixed-width record parsing, four-phase preprocessing, survivability
labeling, a categorical Naive Bayes and a C4.5-style decision tree, and
chance-corrected evaluation over year-split experiments, with a seeded
synthetic cohort generator for verification at desk scale.
"""

from .codebook import Codebook, load_codebook, parse_codebook, shipped_codebook
from .encoding import prepare_features, tumor_size_bin
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    ExperimentSpec,
    cci,
    confusion,
    kappa,
    rmse,
    run_experiment,
)
from .labeling import (
    LabeledInstance,
    LabelingConfig,
    algorithm1_flag,
    apply_rules,
    label_dataset,
)
from .naive_bayes import NaiveBayesModel, nb_classify, nb_predict, nb_train
from .preprocess import (
    MISSING,
    PatientRecord,
    PhaseReport,
    bin_age,
    eliminate_fields,
    filter_lung,
    phase1_structural,
    phase2_relevancy,
    phase3_qualitative,
    phase4_codify,
    run_pipeline,
)
from .schema import (
    FieldSpec,
    ParseLog,
    RawRecord,
    Schema,
    parse_file,
    parse_record,
    parse_schema,
    serialize_record,
)
from .stats import (
    FrequencyProfile,
    YearStats,
    class_profile,
    detect_mst_discontinuity,
    frequency_profile,
    median,
    mst_by_year,
)
from .synth import GeneratorConfig, PlantedRule, generate, inject_noise
from .tree import (
    TreeModel,
    TreeParams,
    build_tree,
    entropy,
    gain_ratio,
    info_gain,
    prune,
    tree_classify,
    tree_predict,
)

__version__ = "0.1.0"
