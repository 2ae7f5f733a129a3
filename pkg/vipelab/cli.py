# -*- coding: utf-8 -*-
"""
vipelab command line.

Usage:
    python -m vipelab [global options] <command> [options]

Global options may come before or after the command. Every command is
deterministic for a fixed ``--seed``. Failures are reported as one JSON
record on stderr with exit code 1; usage errors exit with 2.
"""

import argparse
import dataclasses
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .camera import load_rig
from .dataset import load_dataset, read_pose_records, write_pose_records
from .errors import ConfigError, DimensionError, VipeLabError
from .experiments import (
    ABLATIONS, eval_rows, evaluate_keypoint_retrieval, evaluate_mapper_retrieval, mapper_index,
    run_ablation, training_rows,
)
from .genlab import embedding_viz_export, interpolation_path, perturb_array, random_directions
from .log import RecordWriter, configure_logging
from .mapper2d import check_decoder, evaluate_lifting, lift_array, load_mapper, save_mapper, train_mapper
from .pose.transforms import preprocess_poses
from .retrieval import EmbeddingIndex, format_table, retrieve_3d, write_results
from .settings import Settings, SettingsManager
from .synth import generate_dataset
from .vae import DECODER_SUFFIX, ENCODER_SUFFIX, decode, encode, load_decoder, load_vae, save_vae, train_vae

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _global_options() -> argparse.ArgumentParser:
    """Options shared by the top level and every command; unset ones stay absent."""
    common = argparse.ArgumentParser(add_help=False)
    unset = argparse.SUPPRESS
    common.add_argument('--config', default=unset, help='YAML config file layered over the shipped defaults')
    common.add_argument('--seed', type=int, default=unset, help='Random seed (overrides config and VIPELAB_SEED)')
    common.add_argument('--workers', type=int, default=unset,
                        help='Worker threads (overrides config and VIPELAB_WORKERS)')
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default=unset, help='Log level')
    common.add_argument('--log-json', action='store_true', default=unset, help='Emit logs as JSON lines')
    common.add_argument('--quiet', '-q', action='store_true', default=unset, help='No progress bars or result tables')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = argparse.ArgumentParser(
        prog='vipelab',
        description='View-invariant pose embeddings: data generation, training, retrieval and generation',
        parents=[common],
    )

    sub = parser.add_subparsers(dest='command', metavar='<command>')
    sub.required = True

    p = sub.add_parser('gen-data', help='Generate a synthetic multi-camera dataset', parents=[common])
    p.add_argument('--out', required=True, help='Dataset directory to write')
    p.add_argument('--n-poses', type=int, help='Number of poses (overrides generator.n_poses)')
    p.add_argument('--rig', help='Camera rig YAML file (overrides generator.rig)')
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser('train-vae', help='Train the 3D pose VAE', parents=[common])
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--out', required=True, help='Checkpoint prefix; writes <out>.encoder and <out>.decoder')
    p.add_argument('--epochs', type=int, help='Override vae.epochs')
    p.add_argument('--log', help='Training log (JSON lines); default <out>.log.jsonl')
    p.set_defaults(handler=cmd_train_vae)

    p = sub.add_parser('train-mapper', help='Train the 2D mapping network through a frozen decoder', parents=[common])
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--decoder', required=True, help='Decoder checkpoint (<vae>.decoder)')
    p.add_argument('--out', required=True, help='Mapper checkpoint name')
    p.add_argument('--epochs', type=int, help='Override mapper.epochs')
    p.add_argument('--log', help='Training log (JSON lines); default <out>.log.jsonl')
    p.set_defaults(handler=cmd_train_mapper)

    p = sub.add_parser('eval-hit', help='Cross-view Hit@k of a mapper on a dataset', parents=[common])
    _add_model_args(p)
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--split', default='test', help='Split to evaluate (default: test)')
    p.add_argument('--ks', type=_int_list, help='Comma-separated k values (default from config)')
    p.add_argument('--threshold', type=float, help='Aligned MPJPE hit threshold (default from config)')
    p.add_argument('--baseline', action='store_true', help='Also report the 2D keypoint baseline')
    p.add_argument('--out', help='Results prefix; writes <out>.csv and <out>.jsonl')
    p.set_defaults(handler=cmd_eval_hit)

    p = sub.add_parser('eval-mpjpe', help='Lifting MPJPE of a mapper on a dataset', parents=[common])
    _add_model_args(p)
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--split', default='test', help='Split to evaluate (default: test)')
    p.add_argument('--out', help='Results prefix; writes <out>.csv and <out>.jsonl')
    p.set_defaults(handler=cmd_eval_mpjpe)

    p = sub.add_parser('lift', help='Lift 2D keypoint records to canonical 3D poses', parents=[common])
    _add_model_args(p)
    p.add_argument('--in', dest='input', required=True, help='2D pose records (key joints2d)')
    p.add_argument('--out', required=True, help='3D pose records to write')
    p.set_defaults(handler=cmd_lift)

    p = sub.add_parser('retrieve', help='Retrieve dataset poses nearest to 3D query poses', parents=[common])
    p.add_argument('--vae', required=True, help='VAE checkpoint prefix')
    p.add_argument('--data', required=True, help='Gallery dataset directory')
    p.add_argument('--split', default='test', help='Gallery split (default: test)')
    p.add_argument('--in', dest='input', required=True, help='3D query pose records (key joints3d)')
    p.add_argument('--k', type=int, default=5, help='Neighbours per query (default: 5)')
    p.add_argument('--out', required=True, help='Result records to write')
    p.set_defaults(handler=cmd_retrieve)

    p = sub.add_parser('generate', help='Decode embeddings perturbed by growing noise steps', parents=[common])
    p.add_argument('--decoder', required=True, help='Decoder checkpoint')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--embed', help='Embedding records (key embedding)')
    source.add_argument('--poses', help='3D pose records encoded with --encoder')
    p.add_argument('--encoder', help='Encoder checkpoint for --poses (default: sibling of --decoder)')
    p.add_argument('--alphas', type=_float_list, help='Comma-separated step lengths (default from config)')
    p.add_argument('--directions', type=int, help='Random directions per embedding (default from config)')
    p.add_argument('--out', required=True, help='3D pose records to write')
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser('interpolate', help='Decode waypoints between the embeddings of two poses', parents=[common])
    p.add_argument('--decoder', required=True, help='Decoder checkpoint')
    p.add_argument('--encoder', help='Encoder checkpoint (default: sibling of --decoder)')
    p.add_argument('--a', required=True, help='Start pose records file (first record used)')
    p.add_argument('--b', required=True, help='End pose records file (first record used)')
    p.add_argument('--steps', type=int, help='Number of waypoints including endpoints (default from config)')
    p.add_argument('--out', required=True, help='3D pose records to write')
    p.set_defaults(handler=cmd_interpolate)

    p = sub.add_parser('export-viz', help='Write a 2-component PCA projection of mapper embeddings', parents=[common])
    p.add_argument('--mapper', required=True, help='Mapper checkpoint')
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--split', default='test', help='Split to embed (default: test)')
    p.add_argument('--label', choices=['camera', 'pose'], default='camera', help='Label column (default: camera)')
    p.add_argument('--out', required=True, help='CSV file to write')
    p.set_defaults(handler=cmd_export_viz)

    p = sub.add_parser('ablate', help='Train baseline and ablated pipelines and compare held-out Hit@k', parents=[common])
    p.add_argument('--data', required=True, help='Dataset directory')
    p.add_argument('--no-triplet', action='store_true', help='Drop the triplet loss term')
    p.add_argument('--no-canonical-rotation', action='store_true', help='Skip hip/spine realignment')
    p.add_argument('--no-pretrain', action='store_true', help='Train the mapper with a fresh decoder')
    p.add_argument('--epochs', type=int, help='Override both vae.epochs and mapper.epochs')
    p.add_argument('--out', help='Results prefix; writes <out>.csv and <out>.jsonl')
    p.set_defaults(handler=cmd_ablate)
    return parser


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument('--mapper', required=True, help='Mapper checkpoint')
    p.add_argument('--decoder', required=True, help='Decoder checkpoint')


def _vae_prefix(args: argparse.Namespace) -> str:
    """Common checkpoint prefix of the encoder named by --encoder, or of the --decoder sibling."""
    if args.encoder:
        if not args.encoder.endswith(ENCODER_SUFFIX):
            raise ConfigError(f"Encoder checkpoint name must end with {ENCODER_SUFFIX}", encoder=args.encoder)
        return args.encoder[:-len(ENCODER_SUFFIX)]
    if args.decoder.endswith(DECODER_SUFFIX):
        return args.decoder[:-len(DECODER_SUFFIX)]
    raise ConfigError("Cannot derive the encoder path; pass --encoder", decoder=args.decoder)


def _report(rows: Sequence[Dict[str, Any]], args: argparse.Namespace, title: str) -> None:
    if getattr(args, 'out', None) and args.command in ('eval-hit', 'eval-mpjpe', 'ablate'):
        csv_path, jsonl_path = write_results(rows, args.out)
        logger.info(f"Wrote {csv_path} and {jsonl_path}")
    if not args.quiet:
        print(title)
        print(format_table(rows))


def _load_models(args: argparse.Namespace):
    mapper = load_mapper(args.mapper)
    decoder, _ = load_decoder(args.decoder)
    check_decoder(mapper, decoder)
    return mapper, decoder


def cmd_gen_data(args: argparse.Namespace, settings: Settings) -> int:
    cfg = settings.generator
    if args.n_poses is not None:
        cfg = dataclasses.replace(cfg, n_poses=args.n_poses)
    if args.rig:
        rig = tuple(load_rig(args.rig))
        cfg = dataclasses.replace(cfg, rig=rig,
                                  held_out_cameras=tuple(c for c in cfg.held_out_cameras if c < len(rig)))
    manifest = generate_dataset(cfg, settings.skeleton(), args.out, workers=settings.runtime.workers)
    if not args.quiet:
        print(f"✅ {manifest.n_records} records ({manifest.n_poses} poses x {manifest.n_cameras} cameras) "
              f"written to {args.out}")
    return EXIT_OK


def cmd_train_vae(args: argparse.Namespace, settings: Settings) -> int:
    cfg = settings.vae
    if args.epochs is not None:
        cfg = dataclasses.replace(cfg, epochs=args.epochs)
    dataset = load_dataset(args.data)
    _, world = training_rows(dataset).unique_poses()
    result = train_vae(world, settings.skeleton(), cfg, log_path=args.log or args.out + '.log.jsonl',
                       progress=not args.quiet)
    save_vae(result.model, args.out)
    if not args.quiet and result.log:
        last = result.log[-1]
        print(f"✅ VAE trained: mse={last['mse']:.5f} kl={last['kl']:.5f} triplet={last['triplet']:.5f}")
    return EXIT_OK


def cmd_train_mapper(args: argparse.Namespace, settings: Settings) -> int:
    cfg = settings.mapper
    if args.epochs is not None:
        cfg = dataclasses.replace(cfg, epochs=args.epochs)
    decoder, meta = load_decoder(args.decoder)
    cfg = dataclasses.replace(cfg, canonical_rotation=bool(meta.get('canonical_rotation', cfg.canonical_rotation)),
                              universal_skeleton=bool(meta.get('universal_skeleton', cfg.universal_skeleton)))
    train = training_rows(load_dataset(args.data))
    result = train_mapper(train.joints2d, train.joints3d, settings.skeleton(), decoder, cfg,
                          log_path=args.log or args.out + '.log.jsonl', progress=not args.quiet,
                          decoder_path=args.decoder)
    mapper, _ = result.model
    save_mapper(mapper, args.out)
    if not args.quiet and result.log:
        print(f"✅ Mapper trained: mse={result.log[-1]['mse']:.5f} triplet={result.log[-1]['triplet']:.5f}")
    return EXIT_OK


def cmd_eval_hit(args: argparse.Namespace, settings: Settings) -> int:
    cfg = settings.retrieval
    if args.ks:
        cfg = dataclasses.replace(cfg, ks=tuple(args.ks))
    if args.threshold is not None:
        cfg = dataclasses.replace(cfg, threshold=args.threshold)
    mapper, _ = _load_models(args)
    dataset = load_dataset(args.data)
    skel = settings.skeleton()
    rows = evaluate_mapper_retrieval(mapper, dataset, skel, cfg, settings.runtime.workers, args.split).rows('mapper')
    if args.baseline:
        rows += evaluate_keypoint_retrieval(dataset, skel, cfg, settings.runtime.workers, args.split).rows('2d_keypoints')
    _report(rows, args, f"Hit@k ({args.split} split, threshold {cfg.threshold})")
    return EXIT_OK


def cmd_eval_mpjpe(args: argparse.Namespace, settings: Settings) -> int:
    mapper, decoder = _load_models(args)
    rows_data = eval_rows(load_dataset(args.data), args.split)
    metrics = evaluate_lifting(mapper, decoder, rows_data.joints2d, rows_data.joints3d, settings.skeleton(),
                               np.random.default_rng(settings.runtime.seed))
    _report([{'split': args.split, **metrics}], args, f"Lifting MPJPE ({args.split} split)")
    return EXIT_OK


def cmd_lift(args: argparse.Namespace, settings: Settings) -> int:
    mapper, decoder = _load_models(args)
    ids, joints2d = read_pose_records(args.input, 'joints2d')
    if joints2d.ndim != 3 or joints2d.shape[2] != 2:
        raise DimensionError(f"Expected N x 2 keypoints per record, got {joints2d.shape[1:]}", path=args.input)
    write_pose_records(args.out, ids, lift_array(mapper, decoder, joints2d))
    logger.info(f"Lifted {len(ids)} poses to {args.out}")
    return EXIT_OK


def _encode_world(vae_path: str, joints3d: np.ndarray, settings: Settings):
    model = load_vae(vae_path)
    canonical = preprocess_poses(joints3d, settings.skeleton(), rotate=model.canonical_rotation,
                                 universal_skeleton=model.universal_skeleton)
    mu, _, _ = encode(model, canonical)
    return model, mu


def cmd_retrieve(args: argparse.Namespace, settings: Settings) -> int:
    skel = settings.skeleton()
    ids, queries = read_pose_records(args.input, 'joints3d')
    model, query_mu = _encode_world(args.vae, queries, settings)
    rows = eval_rows(load_dataset(args.data), args.split)
    pose_ids, world = rows.unique_poses()
    canonical = preprocess_poses(world, skel, rotate=model.canonical_rotation,
                                 universal_skeleton=model.universal_skeleton)
    gallery_mu, _, _ = encode(model, canonical)
    gallery = EmbeddingIndex(pose_ids, np.zeros(len(pose_ids), dtype=np.int64), gallery_mu, canonical)
    with RecordWriter(args.out) as writer:
        for qid, result in zip(ids, retrieve_3d(query_mu, gallery, args.k)):
            writer.write({'id': qid, 'neighbors': [int(p) for p in result.pose_ids],
                          'distances': [float(d) for d in result.distances], 'truncated': result.truncated})
    logger.info(f"Retrieved {args.k} neighbours for {len(ids)} queries into {args.out}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace, settings: Settings) -> int:
    decoder, _ = load_decoder(args.decoder)
    if args.embed:
        ids, embeddings = read_pose_records(args.embed, 'embedding')
    else:
        ids, poses = read_pose_records(args.poses, 'joints3d')
        _, embeddings = _encode_world(_vae_prefix(args), poses, settings)
    alphas = tuple(args.alphas) if args.alphas else settings.generation.alphas
    n_dirs = args.directions if args.directions is not None else settings.generation.n_directions
    rng = np.random.default_rng(settings.runtime.seed)
    out_ids, out_poses, extra = [], [], []
    for pid, e in zip(ids, np.atleast_2d(embeddings)):
        for d, z in enumerate(random_directions(rng, len(e), n_dirs)):
            for alpha, pose in zip(alphas, perturb_array(decoder, e, z, alphas)):
                out_ids.append(pid)
                out_poses.append(pose)
                extra.append({'alpha': alpha, 'direction': d})
    write_pose_records(args.out, out_ids, np.asarray(out_poses), extra=extra)
    logger.info(f"Wrote {len(out_ids)} generated poses to {args.out}")
    return EXIT_OK


def cmd_interpolate(args: argparse.Namespace, settings: Settings) -> int:
    prefix = _vae_prefix(args)
    decoder, _ = load_decoder(args.decoder)
    _, pose_a = read_pose_records(args.a, 'joints3d')
    _, pose_b = read_pose_records(args.b, 'joints3d')
    _, mu = _encode_world(prefix, np.stack([pose_a[0], pose_b[0]]), settings)
    steps = args.steps if args.steps is not None else settings.generation.steps
    path = interpolation_path(mu[0], mu[1], steps)
    weights = [t / (steps - 1) for t in range(steps)]
    write_pose_records(args.out, list(range(steps)), decode(decoder, path),
                       extra=[{'weight': w, 'embedding': e.tolist()} for w, e in zip(weights, path)])
    logger.info(f"Wrote {steps} interpolated poses to {args.out}")
    return EXIT_OK


def cmd_export_viz(args: argparse.Namespace, settings: Settings) -> int:
    mapper = load_mapper(args.mapper)
    rows = eval_rows(load_dataset(args.data), args.split)
    index = mapper_index(mapper, rows, settings.skeleton())
    labels = index.camera_ids if args.label == 'camera' else index.pose_ids
    projection = embedding_viz_export(index.embeddings, [int(v) for v in labels], args.out)
    if not args.quiet:
        print(f"✅ PCA projection of {len(labels)} embeddings written to {args.out}"
              + (" (degenerate covariance, zeros written)" if projection.degenerate else ''))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace, settings: Settings) -> int:
    selected = [name for name, flag in (('no_triplet', args.no_triplet),
                                        ('no_canonical_rotation', args.no_canonical_rotation),
                                        ('no_pretrain', args.no_pretrain)) if flag]
    if not selected:
        selected = list(ABLATIONS)
    vae_cfg, mapper_cfg = settings.vae, settings.mapper
    if args.epochs is not None:
        vae_cfg = dataclasses.replace(vae_cfg, epochs=args.epochs)
        mapper_cfg = dataclasses.replace(mapper_cfg, epochs=args.epochs)
    rows = run_ablation(load_dataset(args.data), settings.skeleton(), selected, vae_cfg, mapper_cfg,
                        settings.retrieval, settings.runtime.workers, progress=not args.quiet)
    _report(rows, args, 'Ablation (held-out Hit@k)')
    return EXIT_OK


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    runtime: Dict[str, Any] = {}
    for flag, key in (('seed', 'seed'), ('workers', 'workers'), ('log_level', 'log_level'),
                      ('log_json', 'log_json'), ('quiet', 'quiet')):
        if hasattr(args, flag):
            runtime[key] = getattr(args, flag)
    return {'runtime': runtime} if runtime else {}


def _fail(command: str, record: Dict[str, Any]) -> int:
    print(json.dumps({'command': command, **record}, sort_keys=True), file=sys.stderr)
    return EXIT_FAILURE


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse ``argv`` and run one command.

    Returns:
        int: 0 on success, 1 on a reported failure, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        manager = SettingsManager.get_instance()
        settings = manager.initialize(getattr(args, 'config', None), overrides=_overrides(args))
        configure_logging(settings.runtime.log_level, settings.runtime.log_json)
        args.quiet = settings.runtime.quiet
        handler: Callable[[argparse.Namespace, Settings], int] = args.handler
        return handler(args, settings)
    except VipeLabError as e:
        logger.debug("Command failed", exc_info=True)
        return _fail(args.command, e.to_record())
    except OSError as e:
        logger.debug("Command failed", exc_info=True)
        return _fail(args.command, {'error': 'io_error', 'message': e.strerror or str(e),
                                    'path': getattr(e, 'filename', None)})


def main() -> None:
    sys.exit(dispatch())
