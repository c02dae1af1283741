"""Galerkin finite elements on Bakhvalov-type meshes for singularly perturbed convection-diffusion problems."""
