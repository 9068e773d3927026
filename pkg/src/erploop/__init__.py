"""erploop: a closed-loop ERP decision pipeline with a simulated player.

Streaming filters, trigger-locked epochs, a shrinkage-LDA classifier, a
confidence/dwell selection gate, two game tasks, a scripted experimental
protocol, throughput metrics, replayable session recordings, and a live
NDJSON session service.
"""

from .version import ENGINE_VERSION, FORMAT_VERSION

__version__ = ENGINE_VERSION

from .dsp import (
    CHANNEL_NAMES,
    Epoch,
    FilterChain,
    FilterChainConfig,
    FilteredHistory,
    N_CHANNELS,
    SampleFrame,
    build_filter_chain,
    epoch_length,
    extract_epoch,
)
from .classifier import (
    CalibrationReport,
    LdaModel,
    cross_validate,
    featurize,
    fit_lda,
    grade_for,
    predict_posterior,
)
from .gate import Activation, EvidenceState
from .stimulus import FlashSchedule, TextureSpec, TriggerEvent, gen_texture
from .subject import AttentionState, SubjectProfile, SyntheticSubject, apply_learning
from .metrics import ErpAverage, RunMetrics, average_erps, bits_per_selection, itr, summarize_runs, task_accuracy, task_time
from .tasks import ComplexTask, ComplexTaskConfig, RunTally, SpellerTask, SpellerTaskConfig, default_complex_schedule
from .protocol import Phase, ProtocolState, advance_protocol
from .engine import EngineConfig, SessionEngine
from .recorder import SessionLog, SessionRecorder, read_session, write_eeg, write_run_metadata
from .replay import ReplayResult, replay_session
from .simulate import ProtocolConfig, SessionRunner, SimConfig, run_sweep, simulate_subject
