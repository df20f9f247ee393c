use crate::autodiff::DiffScalarField;
use crate::error::{Error, Result};
use crate::integrators::{ChannelNet, ForceField, NetForce};
use crate::nets::{dissipative_output_dim, DissipativeForceModel, MlpArchitecture, MlpModel, ModelFile, ModelKind, RawForceModel};
use crate::systems::System;

use super::config::TrainConfig;

/// A `(G, F)` pair where each side is either the system's exact field or a network.
pub struct Models {
    system: System,
    exact_g: Box<dyn DiffScalarField>,
    exact_f: Box<dyn ForceField>,
    pub g_net: Option<MlpModel>,
    pub f_net: Option<NetForce>,
}

impl Clone for Models {
    fn clone(&self) -> Self {
        Models {
            system: self.system.clone(),
            exact_g: self.system.exact_g(),
            exact_f: self.system.exact_force(),
            g_net: self.g_net.clone(),
            f_net: self.f_net.clone(),
        }
    }
}

impl std::fmt::Debug for Models {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Models")
            .field("system", &self.system)
            .field("g_net", &self.g_net.is_some())
            .field("f_net", &self.f_net.is_some())
            .finish()
    }
}

impl Models {
    pub fn exact(system: &System) -> Self {
        Models {
            system: system.clone(),
            exact_g: system.exact_g(),
            exact_f: system.exact_force(),
            g_net: None,
            f_net: None,
        }
    }

    pub fn with_g(mut self, net: MlpModel) -> Result<Self> {
        let dim = self.system.layout().dim();
        if net.arch().input != dim || net.arch().output != 1 {
            return Err(Error::Invalid(format!("G network must map {dim} inputs to 1 output")));
        }
        self.g_net = Some(net);
        Ok(self)
    }

    pub fn with_f(mut self, net: NetForce) -> Result<Self> {
        if net.layout() != self.system.layout() {
            return Err(Error::Invalid("force network layout does not match the system".into()));
        }
        self.f_net = Some(net);
        Ok(self)
    }

    /// Freshly initialised networks for the sides the regime learns.
    pub fn for_config(cfg: &TrainConfig) -> Result<Self> {
        let system = cfg.system()?;
        let layout = system.layout();
        let mut m = Models::exact(&system);
        if cfg.regime.learns_g() {
            let mut arch = MlpArchitecture::new(layout.dim(), cfg.hidden.clone(), 1);
            arch.activation = cfg.activation;
            m = m.with_g(MlpModel::random(arch, cfg.seed)?)?;
        }
        if cfg.regime.learns_f() {
            let nets = (0..layout.n_t)
                .map(|c| {
                    let out = dissipative_output_dim(layout.n_v, false);
                    let mut arch = MlpArchitecture::new(layout.dim(), cfg.hidden.clone(), out);
                    arch.activation = cfg.activation;
                    let net = MlpModel::random(arch, cfg.seed.wrapping_add(1 + c as u64))?;
                    Ok(ChannelNet::Dissipative(DissipativeForceModel::new(net, layout.n_v, false)?))
                })
                .collect::<Result<Vec<_>>>()?;
            m = m.with_f(NetForce::new(layout, nets)?)?;
        }
        Ok(m)
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn g(&self) -> &dyn DiffScalarField {
        match &self.g_net {
            Some(n) => n,
            None => self.exact_g.as_ref(),
        }
    }

    pub fn f(&self) -> &dyn ForceField {
        match &self.f_net {
            Some(n) => n,
            None => self.exact_f.as_ref(),
        }
    }

    /// Trainable vector: network G parameters, then network F parameters.
    pub fn theta(&self) -> Vec<f64> {
        let mut p = self.g_net.as_ref().map(|n| n.params().to_vec()).unwrap_or_default();
        if let Some(f) = &self.f_net {
            p.extend(f.params());
        }
        p
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        let ng = self.g_net.as_ref().map_or(0, |n| n.params().len());
        let nf = self.f_net.as_ref().map_or(0, |n| n.param_count());
        if theta.len() != ng + nf {
            return Err(Error::ArityMismatch { expected: ng + nf, got: theta.len() });
        }
        if let Some(n) = &mut self.g_net {
            n.set_params(&theta[..ng])?;
        }
        if let Some(f) = &mut self.f_net {
            f.set_params(&theta[ng..])?;
        }
        Ok(())
    }

    pub fn g_file(&self) -> Option<ModelFile> {
        self.g_net.as_ref().map(ModelFile::scalar)
    }

    /// One file per entropy channel.
    pub fn f_files(&self) -> Vec<ModelFile> {
        self.f_net
            .iter()
            .flat_map(|f| f.nets())
            .map(|n| match n {
                ChannelNet::Dissipative(m) => ModelFile::dissipative(m),
                ChannelNet::Raw(m) => ModelFile::raw(m),
            })
            .collect()
    }

    /// Rebuilds from saved files; absent sides fall back to the exact fields.
    pub fn from_files(system: &System, g: Option<&ModelFile>, f: &[ModelFile]) -> Result<Self> {
        let mut m = Models::exact(system);
        if let Some(file) = g {
            m = m.with_g(file.into_scalar()?)?;
        }
        if !f.is_empty() {
            let nets = f
                .iter()
                .map(|file| match file.kind {
                    ModelKind::DissipativeForce => Ok(ChannelNet::Dissipative(file.into_dissipative()?)),
                    ModelKind::RawForce => Ok(ChannelNet::Raw(RawForceModel::new(file.model()?))),
                    ModelKind::ScalarG => Err(Error::Invalid("expected a force model file".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            m = m.with_f(NetForce::new(system.layout(), nets)?)?;
        }
        Ok(m)
    }
}

impl Models {
    /// Loss view that trains exactly the network sides.
    pub fn loss_model(&self) -> super::loss::LossModel<'_> {
        super::loss::LossModel::new(self.g(), self.f(), self.g_net.is_some(), self.f_net.is_some())
    }
}
