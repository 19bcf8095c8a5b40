"""
ADVERSARIAL.PY - Least-squares GAN terms shared by SF-GAN and ML-GAN

Real targets are 1 and fake targets 0. The discriminator's fake term is
squared like its real term.
"""

from contextlib import contextmanager

import torch
import torch.nn as nn

from .exceptions import ContractError


def lsgan_generator_loss(fake_scores: list[torch.Tensor]) -> torch.Tensor:
    """Sum over discriminators of mean((1 - D(G(x)))^2)."""
    if not fake_scores:
        raise ContractError('no discriminator scores to compute a generator loss from')
    return sum(((1.0 - scores) ** 2).mean() for scores in fake_scores)


def lsgan_discriminator_loss(real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]) -> list[torch.Tensor]:
    """Per discriminator: mean((1 - D(y))^2) + mean(D(G(x))^2)."""
    if len(real_scores) != len(fake_scores):
        raise ContractError(f'{len(real_scores)} real score maps but {len(fake_scores)} fake ones')
    return [((1.0 - real) ** 2).mean() + (fake ** 2).mean() for real, fake in zip(real_scores, fake_scores)]


@contextmanager
def frozen(module: nn.Module):
    """Disable gradients of ``module`` so a generator update leaves it untouched."""
    flags = [p.requires_grad for p in module.parameters()]
    for p in module.parameters():
        p.requires_grad_(False)
    try:
        yield module
    finally:
        for p, flag in zip(module.parameters(), flags):
            p.requires_grad_(flag)


def uniform_int(low: int, high: int, generator: torch.Generator) -> int:
    """Uniform integer in [low, high] drawn from ``generator``."""
    return int(torch.randint(low, high + 1, (1,), generator=generator))
