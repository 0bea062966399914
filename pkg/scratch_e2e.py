"""Scratch: criterion-6 style end-to-end personalization gain check."""
import numpy as np, time, sys
from melbind.audio import tonal, click_track, noise_texture
from melbind.training import (PretrainConfig, pretrain, Concept, ti_config, db_config,
                              register_concept, train_ti, train_db)
from melbind.metrics import ToyFeatureEmbedder, embed_set, clap_a
from melbind.model import save_model, load_model

PROMPT_WORDS = ("a", "recording", "of")

def build_corpus():
    corpus = []
    keys = [("c","major",90),("g","major",120),("d","minor",100),("a","minor",140),
            ("e","major",110),("f","major",80),("b","minor",95),("d#","major",75)]
    for i,(k,s,b) in enumerate(keys):
        for j in range(3):
            corpus.append((tonal(k, s, b, 4.0, seed=100*i+j), f"{k} {s} marimba arpeggio at {b} bpm"))
    for i,b in enumerate([66, 84, 100, 120, 132, 160]):
        for j in range(3):
            corpus.append((click_track(b, 4.0, seed=500+10*i+j), f"steady click beat at {b} bpm"))
    for i,c in enumerate(["white","pink"]):
        for j in range(3):
            corpus.append((noise_texture(c, 4.0, seed=900+10*i+j), f"{c} noise texture"))
    return corpus

def concepts():
    out = []
    specs = [
        ("fastbeat", "beat", lambda j: click_track(144, 6.0, seed=2000+j)),
        ("slowbeat", "beat", lambda j: click_track(72, 6.0, seed=2100+j)),
        ("darkmarimba", "marimba", lambda j: tonal("f#", "minor", 130, 6.0, seed=2200+j)),
        ("brightmarimba", "marimba", lambda j: tonal("a#", "major", 85, 6.0, seed=2300+j)),
    ]
    for name, noun, make in specs:
        out.append(Concept(name=name, class_noun=noun, clips=[make(j) for j in range(5)]))
    return out

def gen_clips(model, prompt, n=4, segs=4, seed=0):
    return [model.sample(prompt, n_segments=segs, seed=seed+k) for k in range(n)]

def main():
    import pathlib
    ckpt = pathlib.Path("/tmp/scratch_base_s1.npz")
    corpus = build_corpus()
    if ckpt.exists():
        base = load_model(ckpt)
        print("loaded cached base model")
    else:
        t0=time.time()
        res = pretrain(corpus, PretrainConfig(steps=4000, lr=2e-3, batch=16, seed=0,
                                              extra_vocab_words=PROMPT_WORDS))
        base = res.model
        print(f"pretrain {time.time()-t0:.0f}s eval {res.initial_eval_loss:.0f}->{res.final_eval_loss:.0f}")
        save_model(base, ckpt)

    emb = ToyFeatureEmbedder()
    wins_ti, wins_db = 0, 0
    for ci, concept in enumerate(concepts()):
        train_set = embed_set(emb, concept.clips)
        t0 = time.time()
        pre = gen_clips(base, f"a recording of a {concept.class_noun}", seed=7000+ci)
        pre_score = clap_a(embed_set(emb, pre), train_set)

        m_ti = base.copy()
        cfg_ti = ti_config(seed=100+ci)
        register_concept(m_ti, concept, cfg_ti)
        m_ti = train_ti(m_ti, concept, cfg_ti)
        post_ti = gen_clips(m_ti, f"a recording of a {concept.placeholder}", seed=7100+ci)
        ti_score = clap_a(embed_set(emb, post_ti), train_set)

        cfg_db = db_config(seed=200+ci)
        m_db = train_db(base, concept, cfg_db)
        post_db = gen_clips(m_db, f"a recording of a sks {concept.class_noun}", seed=7200+ci)
        db_score = clap_a(embed_set(emb, post_db), train_set)

        wins_ti += ti_score > pre_score
        wins_db += db_score > pre_score
        print(f"{concept.name:14s} pre {pre_score:+.4f}  TI {ti_score:+.4f}  DB {db_score:+.4f}   ({time.time()-t0:.0f}s)")
    print(f"TI wins {wins_ti}/4, DB wins {wins_db}/4")

if __name__ == "__main__":
    main()
