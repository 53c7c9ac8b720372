"""Sliding-window convolutional attention text-line recognition toolkit."""

from .checkpoint import load_checkpoint, load_model, read_checkpoint, save_checkpoint
from .data import (JitterSpec, Sample, export_heatmap, gen_dataset,
                   load_dataset, read_pgm, render_textline, save_dataset,
                   write_pgm)
from .decoding import Hypothesis, Lexicon, beam_search, levenshtein, lexicon_select
from .features import (ExtractorConfig, FeatureExtractor, FeatureSequence,
                       extract_features, feature_param_count)
from .model import ModelConfig, RecognizerModel
from .optim import (Parameter, adam_step, clip_grad_norm, finite_diff_check,
                    zero_grads)
from .seq2seq import (AttentionMap, ConvSeq2Seq, SeqModelConfig,
                      SourceRepresentation, Vocabulary)
from .tensor import Tensor, backward, no_grad, set_default_dtype
from .training import (TrainConfig, TrainReport, TrainingDiverged, nll_loss,
                       sequence_accuracy, train_loop, train_step)
from .windowing import (NormalizedImage, RawImage, WindowSequence,
                        extract_windows, normalize_image, resize_patch,
                        window_count)

__version__ = "0.1.0"
