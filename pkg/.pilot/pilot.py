import time
from pathlib import Path
from ris_semcom.corpus import write_corpus
from ris_semcom.harness import (ExperimentConfig, OptimizerSettings, SystemVariant,
                                prepare_data, train, evaluate)
from ris_semcom.model import Transceiver

base = Path('/root/pkg/.pilot')
write_corpus(base/'train.txt', 10000, 7)
write_corpus(base/'test.txt', 1000, 8)
cfg = ExperimentConfig(
    train_corpus=base/'train.txt', test_corpus=base/'test.txt',
    checkpoint_dir=base/'ck', results_path=base/'r.csv', vocab_path=base/'v.txt',
    optimizer=OptimizerSettings(kind='adam', learning_rate=1e-3, epochs=20),
    seeds=(1,), eval_batch_size=128,
)
data = prepare_data(cfg)
print('vocab', data.vocab.size, 'train', data.train_ids.shape, 'test', data.test_ids.shape, flush=True)
models = {}
for variant in (SystemVariant.RIS, SystemVariant.POINT_TO_POINT, SystemVariant.UPPER_BOUND):
    t0 = time.time()
    out = train(cfg, data, variant, seed=1, progress=lambda l: print(f'  {l}', flush=True))
    print(f'{variant.value}: {time.time()-t0:.1f}s best_epoch={out.best_epoch}', flush=True)
    m = Transceiver.init(data.shapes, 0)
    m.params.load_state(out.state)
    models[variant] = m
for snr in (0.0, 6.0, 12.0):
    for variant, m in models.items():
        t0 = time.time()
        row = evaluate(m, data, cfg, variant, snr, 0.0, 1)
        print(f'{variant.value} snr={snr} bleu1={row.bleu1:.4f} bleu2={row.bleu2:.4f} loss={row.mean_loss:.3f} ({time.time()-t0:.0f}s)', flush=True)
for eps in (0.1, 0.4):
    for variant in (SystemVariant.RIS, SystemVariant.POINT_TO_POINT):
        row = evaluate(models[variant], data, cfg, variant, 6.0, eps, 1)
        print(f'{variant.value} snr=6 eps={eps} bleu1={row.bleu1:.4f}', flush=True)
